#include "pathwise/calculus.hpp"

#include <algorithm>
#include <cmath>

namespace pathwise {

namespace {

// Index of the last level-`level` node <= t. Robust against rounding in
// node construction.
std::size_t last_left_endpoint(const PartitionSequence& p, int level, double t) {
  const std::size_t cells = p.cell_count(level);
  const double mesh = p.mesh(level);
  std::size_t i = static_cast<std::size_t>(
      std::min(static_cast<double>(cells), std::max(0.0, std::floor(t / mesh))));
  while (i > 0 && p.node(level, i) > t) --i;
  while (i + 1 <= cells && p.node(level, i + 1) <= t) ++i;
  return i;
}

}  // namespace

double follmer_sum(const Integrand& y, const Trajectory& x,
                   const PartitionSequence& p, int level, double t) {
  const double horizon = p.horizon();
  if (!(t > 0.0) || t > horizon) {
    throw std::invalid_argument("follmer_sum requires 0 < t <= T");
  }
  const std::size_t cells = p.cell_count(level);
  // Cells contained in [0, t]: the sum telescopes to x(t) - x(0) exactly for
  // constant integrands whenever t is a grid node. t = T is improper (the
  // proper integral up to T - mesh) but on these uniform grids the cutoff
  // keeps every cell and only avoids evaluating y at T itself.
  std::size_t n_cells;
  if (t == horizon) {
    n_cells = cells;
  } else {
    n_cells = std::min(last_left_endpoint(p, level, t), cells);
  }
  double sum = 0.0;
  double prev = x.value(p.node(level, 0));
  for (std::size_t i = 0; i < n_cells; ++i) {
    const double ti = p.node(level, i);
    const double next = x.value(p.node(level, i + 1));
    sum += y(PathSlice(x, ti)) * (next - prev);
    prev = next;
  }
  return sum;
}

ConvergenceTable follmer_integral(const Integrand& y, const Trajectory& x,
                                  const PartitionSequence& p, double t,
                                  double tol) {
  ConvergenceTable table;
  table.tolerance = tol;
  for (int level = 1; level <= p.max_level(); ++level) {
    table.levels.push_back(level);
    table.values.push_back(follmer_sum(y, x, p, level, t));
    if (table.values.size() > 1) {
      table.cauchy_gaps.push_back(
          std::abs(table.values.back() - table.values[table.values.size() - 2]));
    }
  }
  table.converged = !table.cauchy_gaps.empty() && table.cauchy_gaps.back() <= tol;
  if (table.converged) table.limit = table.values.back();
  return table;
}

QVDecomposition quadratic_variation(const Trajectory& x,
                                    const PartitionSequence& p,
                                    const std::vector<double>& eval_times) {
  const int level = p.max_level();
  const std::size_t cells = p.cell_count(level);
  const double horizon = p.horizon();

  // Cumulative squared increments over the finest grid.
  std::vector<double> cum(cells + 1, 0.0);
  double prev = x.value(p.node(level, 0));
  for (std::size_t i = 0; i < cells; ++i) {
    const double next = x.value(p.node(level, i + 1));
    cum[i + 1] = cum[i] + (next - prev) * (next - prev);
    prev = next;
  }

  QVDecomposition out;
  for (double t : eval_times) {
    if (t < 0.0 || t > horizon) {
      throw std::invalid_argument("qv eval time outside [0, T]");
    }
    const std::size_t last = t >= horizon ? cells - 1 : last_left_endpoint(p, level, t);
    const double total = t <= 0.0 ? 0.0 : cum[std::min(last + 1, cells)];
    double atomic = 0.0;
    for (const Jump& j : x.jumps()) {
      if (j.time > t) break;
      const double dx = x.left_value(j.time) * (j.factor - 1.0);
      atomic += dx * dx;
    }
    out.times.push_back(t);
    out.total.push_back(total);
    out.atomic_part.push_back(atomic);
    out.continuous_part.push_back(total - atomic);
  }
  return out;
}

SmoothFunction make_power_function(int power) {
  SmoothFunction f;
  f.value = [power](double, double x, std::span<const double>) {
    return std::pow(x, power);
  };
  f.dt = [](double, double, std::span<const double>) { return 0.0; };
  f.dx = [power](double, double x, std::span<const double>) {
    return power * std::pow(x, power - 1);
  };
  f.dxx = [power](double, double x, std::span<const double>) {
    return power * (power - 1) * std::pow(x, power - 2);
  };
  return f;
}

double ito_follmer_residual(const SmoothFunction& f, const Trajectory& x,
                            const std::vector<PathFunction>& hindsight,
                            const PartitionSequence& p, int level, double t) {
  const double horizon = p.horizon();
  if (t < 0.0) t = horizon;
  const std::size_t cells = p.cell_count(level);
  const std::size_t n_cells =
      t >= horizon ? cells : std::min(last_left_endpoint(p, level, t), cells);
  if (n_cells == 0) return 0.0;
  // Evaluate the identity on [0, t_eff], the right endpoint of the last
  // included cell, so both sides cover exactly the same increments.
  const double t_eff = p.node(level, n_cells);

  const std::size_t m = hindsight.size();
  std::vector<double> y_now(m), y_next(m);
  auto fill_hindsight = [&](double time, std::vector<double>& out) {
    for (std::size_t j = 0; j < m; ++j) out[j] = hindsight[j](x, time);
  };

  // Continuous quadratic-variation increments per level-n cell, measured on
  // the trajectory's master grid (its finest resolution) with the atomic
  // squares of stored jumps removed. The integrands below are sampled at
  // level n, so the residual probes the level-n closure of the identity
  // against the best available quadratic-variation measure.
  std::vector<double> qv_cont(n_cells, 0.0);
  {
    const auto& master = x.grid();
    std::size_t coarse = 0;
    double prev = x.value(master[0]);
    for (std::size_t k = 1; k < master.size() && coarse < n_cells; ++k) {
      const double cur = x.value(master[k]);
      while (coarse < n_cells && master[k] > p.node(level, coarse + 1)) ++coarse;
      if (coarse >= n_cells) break;
      qv_cont[coarse] += (cur - prev) * (cur - prev);
      prev = cur;
    }
    for (const Jump& j : x.jumps()) {
      if (j.time > t_eff) break;
      // cell c with node(c) < s <= node(c+1)
      std::size_t idx = last_left_endpoint(p, level, j.time);
      if (idx > 0 && p.node(level, idx) == j.time) --idx;
      const double dj = x.left_value(j.time) * (j.factor - 1.0);
      qv_cont[std::min(idx, n_cells - 1)] -= dj * dj;
    }
  }

  double drift_term = 0.0, follmer_term = 0.0, qv_term = 0.0, bv_term = 0.0;
  fill_hindsight(0.0, y_now);
  double x_now = x.value(0.0);

  for (std::size_t i = 0; i < n_cells; ++i) {
    const double ti = p.node(level, i);
    const double ti1 = p.node(level, i + 1);
    const double x_next = x.value(ti1);
    fill_hindsight(ti1, y_next);

    const std::span<const double> ys(y_now);
    drift_term += f.dt(ti, x_now, ys) * (ti1 - ti);
    follmer_term += f.dx(ti, x_now, ys) * (x_next - x_now);
    qv_term += 0.5 * f.dxx(ti, x_now, ys) * qv_cont[i];
    for (std::size_t j = 0; j < m && j < f.dy.size(); ++j) {
      bv_term += f.dy[j](ti, x_now, ys) * (y_next[j] - y_now[j]);
    }

    x_now = x_next;
    std::swap(y_now, y_next);
  }

  // Jump corrections over stored jumps in (0, t_eff].
  double jump_term = 0.0;
  std::vector<double> y_left(m), y_right(m);
  for (const Jump& j : x.jumps()) {
    if (j.time > t_eff) break;
    const Trajectory::Evaluation e = x.evaluate(j.time);
    fill_hindsight(j.time, y_right);
    // Hindsight companions are continuous on the classes where they are
    // used; reuse the closed value as the left limit.
    y_left = y_right;
    const std::span<const double> yl(y_left), yr(y_right);
    jump_term += f.value(j.time, e.right, yr) - f.value(j.time, e.left, yl) -
                 f.dx(j.time, e.left, yl) * e.jump;
  }

  std::vector<double> y0(m), yT(m);
  fill_hindsight(0.0, y0);
  fill_hindsight(t_eff, yT);
  const double lhs = f.value(t_eff, x.value(t_eff), std::span<const double>(yT)) -
                     f.value(0.0, x.value(0.0), std::span<const double>(y0));
  const double rhs = drift_term + follmer_term + qv_term + bv_term + jump_term;
  return std::abs(lhs - rhs);
}

}  // namespace pathwise
