#include "pathwise/hedging.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>

#include "pathwise/calculus.hpp"
#include "pathwise/detail/parallel.hpp"

namespace pathwise {

double payoff_value(const Payoff& h, double x) {
  if (const auto* c = std::get_if<CallPayoff>(&h)) return std::max(x - c->strike, 0.0);
  if (const auto* p = std::get_if<PutPayoff>(&h)) return std::max(p->strike - x, 0.0);
  const auto& tab = std::get<TabulatedPayoff>(h);
  const auto& xs = tab.xs;
  const auto& hs = tab.hs;
  if (x <= xs.front()) {
    const double slope = (hs[1] - hs[0]) / (xs[1] - xs[0]);
    return hs.front() + slope * (x - xs.front());
  }
  if (x >= xs.back()) {
    const std::size_t n = xs.size();
    const double slope = (hs[n - 1] - hs[n - 2]) / (xs[n - 1] - xs[n - 2]);
    return hs.back() + slope * (x - xs.back());
  }
  const auto it = std::upper_bound(xs.begin(), xs.end(), x);
  const std::size_t k = static_cast<std::size_t>(it - xs.begin()) - 1;
  const double w = (x - xs[k]) / (xs[k + 1] - xs[k]);
  return hs[k] + w * (hs[k + 1] - hs[k]);
}

double payoff_lipschitz(const Payoff& h) {
  if (std::holds_alternative<CallPayoff>(h) || std::holds_alternative<PutPayoff>(h)) {
    return 1.0;
  }
  return std::get<TabulatedPayoff>(h).lipschitz;
}

namespace {

double payoff_strike_hint(const Payoff& h, double fallback) {
  if (const auto* c = std::get_if<CallPayoff>(&h)) return c->strike;
  if (const auto* p = std::get_if<PutPayoff>(&h)) return p->strike;
  return fallback;
}

// Thomas algorithm; a = sub, b = diag, c = super (a[0], c[n-1] unused).
void solve_tridiagonal(std::vector<double>& a, std::vector<double>& b,
                       std::vector<double>& c, std::vector<double>& d) {
  const std::size_t n = b.size();
  for (std::size_t i = 1; i < n; ++i) {
    const double w = a[i] / b[i - 1];
    b[i] -= w * c[i - 1];
    d[i] -= w * d[i - 1];
  }
  d[n - 1] /= b[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) {
    d[i] = (d[i] - c[i] * d[i + 1]) / b[i];
  }
}

}  // namespace

double ValueSurface::value(double t, double x) const {
  const double xi = std::log(x);
  if (xi < log_space.front() || xi > log_space.back()) {
    throw std::out_of_range("value surface queried outside its log-price domain");
  }
  t = std::clamp(t, 0.0, horizon);
  const auto ti = std::upper_bound(times.begin(), times.end(), t);
  std::size_t j = ti == times.begin() ? 0 : static_cast<std::size_t>(ti - times.begin()) - 1;
  if (j + 1 >= times.size()) j = times.size() - 2;
  const auto si = std::upper_bound(log_space.begin(), log_space.end(), xi);
  std::size_t i = si == log_space.begin() ? 0 : static_cast<std::size_t>(si - log_space.begin()) - 1;
  if (i + 1 >= log_space.size()) i = log_space.size() - 2;
  const double wt = (t - times[j]) / (times[j + 1] - times[j]);
  const double wx = (xi - log_space[i]) / (log_space[i + 1] - log_space[i]);
  const double v0 = values[j][i] + wx * (values[j][i + 1] - values[j][i]);
  const double v1 = values[j + 1][i] + wx * (values[j + 1][i + 1] - values[j + 1][i]);
  return v0 + wt * (v1 - v0);
}

double ValueSurface::delta_at(double t, double x) const {
  const double xi = std::log(x);
  if (xi < log_space.front() || xi > log_space.back()) {
    throw std::out_of_range("value surface queried outside its log-price domain");
  }
  t = std::clamp(t, 0.0, horizon);
  const auto ti = std::upper_bound(times.begin(), times.end(), t);
  std::size_t j = ti == times.begin() ? 0 : static_cast<std::size_t>(ti - times.begin()) - 1;
  if (j + 1 >= times.size()) j = times.size() - 2;
  const auto si = std::upper_bound(log_space.begin(), log_space.end(), xi);
  std::size_t i = si == log_space.begin() ? 0 : static_cast<std::size_t>(si - log_space.begin()) - 1;
  if (i + 1 >= log_space.size()) i = log_space.size() - 2;
  const double wt = (t - times[j]) / (times[j + 1] - times[j]);
  const double wx = (xi - log_space[i]) / (log_space[i + 1] - log_space[i]);
  const double d0 = delta[j][i] + wx * (delta[j][i + 1] - delta[j][i]);
  const double d1 = delta[j + 1][i] + wx * (delta[j + 1][i + 1] - delta[j + 1][i]);
  return d0 + wt * (d1 - d0);
}

ValueSurface solve_bs_pde(const Payoff& h, double sigma, double rate,
                          double horizon, const PdeGridSpec& grid) {
  if (!(sigma > 0.0)) throw std::invalid_argument("pde sigma must be positive");
  if (!(horizon > 0.0)) throw std::invalid_argument("pde horizon must be positive");
  if (rate < 0.0) throw std::invalid_argument("pde rate must be >= 0");
  if (grid.space_cells < 8 || grid.time_steps < 8) {
    throw std::invalid_argument("pde grid too small to be meaningful");
  }

  ValueSurface surf;
  surf.sigma = sigma;
  surf.rate = rate;
  surf.horizon = horizon;

  const double band = sigma * std::sqrt(horizon);
  double lo = grid.log_lo, hi = grid.log_hi;
  if (std::isnan(lo) || std::isnan(hi)) {
    const double center = std::log(grid.center);
    const double strike_off =
        std::abs(std::log(payoff_strike_hint(h, grid.center) / grid.center));
    const double half = std::max(6.0 * band, strike_off + band);
    lo = center - half - strike_off;
    hi = center + half + strike_off;
  }
  if (!(hi > lo)) throw std::invalid_argument("pde log bounds inverted");
  if (hi - lo < 6.0 * band) {
    surf.warnings.push_back("log-price band narrower than 6 sigma sqrt(T)");
  }

  const int m = grid.space_cells;
  const int n = grid.time_steps;
  const double dxi = (hi - lo) / m;
  const double dt = horizon / n;

  surf.log_space.resize(m + 1);
  for (int i = 0; i <= m; ++i) surf.log_space[i] = lo + i * dxi;
  surf.times.resize(n + 1);
  for (int j = 0; j <= n; ++j) surf.times[j] = horizon * j / n;

  double h_min = std::numeric_limits<double>::infinity();
  std::vector<double> v(m + 1);
  for (int i = 0; i <= m; ++i) {
    v[i] = payoff_value(h, std::exp(surf.log_space[i]));
    h_min = std::min(h_min, v[i]);
  }
  const bool clamp_at_zero = h_min >= 0.0;

  surf.values.assign(n + 1, std::vector<double>());
  surf.values[n] = v;

  const double b = rate - 0.5 * sigma * sigma;
  const double c = 0.5 * sigma * sigma;
  const double conv = b / (2.0 * dxi);
  const double diff = c / (dxi * dxi);
  // L v = conv (v_{i+1} - v_{i-1}) + diff (v_{i+1} - 2 v_i + v_{i-1}) - r v_i
  const double l_sub = diff - conv;
  const double l_diag = -2.0 * diff - rate;
  const double l_sup = diff + conv;

  auto boundary = [&](double t, double xi) {
    const double tau = horizon - t;
    return std::exp(-rate * tau) * payoff_value(h, std::exp(xi + rate * tau));
  };

  constexpr int kRannacherSteps = 4;
  std::vector<double> sub(m - 1), diag(m - 1), sup(m - 1), rhs(m - 1);
  for (int j = n - 1; j >= 0; --j) {
    const double theta = (n - 1 - j) < kRannacherSteps ? 1.0 : 0.5;
    const double t_new = surf.times[j];
    const double lo_bc = boundary(t_new, surf.log_space.front());
    const double hi_bc = boundary(t_new, surf.log_space.back());
    for (int i = 1; i < m; ++i) {
      const double explicit_part =
          theta == 1.0
              ? v[i]
              : v[i] + (1.0 - theta) * dt *
                           (l_sub * v[i - 1] + l_diag * v[i] + l_sup * v[i + 1]);
      sub[i - 1] = -theta * dt * l_sub;
      diag[i - 1] = 1.0 - theta * dt * l_diag;
      sup[i - 1] = -theta * dt * l_sup;
      rhs[i - 1] = explicit_part;
    }
    rhs[0] += theta * dt * l_sub * lo_bc;
    rhs[m - 2] += theta * dt * l_sup * hi_bc;
    solve_tridiagonal(sub, diag, sup, rhs);
    v[0] = lo_bc;
    v[m] = hi_bc;
    for (int i = 1; i < m; ++i) v[i] = rhs[i - 1];
    if (clamp_at_zero) {
      for (double& vi : v) vi = std::max(vi, 0.0);
    }
    surf.values[j] = v;
  }

  // delta = v_xi / x, centered differences, one-sided at the edges.
  surf.delta.assign(n + 1, std::vector<double>(m + 1));
  for (int j = 0; j <= n; ++j) {
    const auto& row = surf.values[j];
    auto& drow = surf.delta[j];
    for (int i = 0; i <= m; ++i) {
      double dv;
      if (i == 0) {
        dv = (row[1] - row[0]) / dxi;
      } else if (i == m) {
        dv = (row[m] - row[m - 1]) / dxi;
      } else {
        dv = (row[i + 1] - row[i - 1]) / (2.0 * dxi);
      }
      drow[i] = dv / std::exp(surf.log_space[i]);
    }
  }
  return surf;
}

TildeF tilde_F(double t, double s, const Payoff& h, double mu, double a,
               double horizon, int k_trunc) {
  if (!(a * mu < 0.0)) throw std::invalid_argument("series hedge requires a mu < 0");
  if (k_trunc < 1) throw std::invalid_argument("series truncation must be >= 1");
  if (t < 0.0 || t > horizon) throw std::invalid_argument("series time outside [0, T]");
  const double lambda = -mu / a;
  const double tau = horizon - t;
  const double u = lambda * tau;
  const double growth = std::exp(mu * tau);

  double value = 0.0;
  double weight = 1.0;          // u^k / k!
  double factor_pow = 1.0;      // (1+a)^k
  double partial_u = 0.0;       // sum_{k<=K} u^k / k!
  for (int k = 0; k <= k_trunc; ++k) {
    value += payoff_value(h, s * growth * factor_pow) * weight;
    partial_u += weight;
    weight *= u / (k + 1);
    factor_pow *= (1.0 + a);
  }
  value *= std::exp(-u);

  // Lipschitz tail bound for the dropped terms, |h(y)| <= |h(0)| + L y.
  const double h0 = std::abs(payoff_value(h, 0.0));
  const double lip = payoff_lipschitz(h);
  const double u2 = (1.0 + std::abs(a)) * u;
  double partial_u2 = 0.0;
  double w2 = 1.0;
  for (int k = 0; k <= k_trunc; ++k) {
    partial_u2 += w2;
    w2 *= u2 / (k + 1);
  }
  const double tail_u = std::max(0.0, std::exp(u) - partial_u);
  const double tail_u2 = std::max(0.0, std::exp(u2) - partial_u2);
  TildeF out;
  out.value = value;
  out.tail_bound = std::exp(-u) * (h0 * tail_u +
                                   lip * s * std::exp(std::abs(mu) * tau) * tail_u2);
  return out;
}

Portfolio build_bs_hedge(const ValueSurface& surface, double x0) {
  auto surf_copy = std::make_shared<ValueSurface>(surface);
  StockPosition phi = [surf_copy](const PathSlice& s) {
    return surf_copy->delta_at(s.time(), s.spot());
  };
  Portfolio::ValueFunctional value_fn = [surf_copy](double t, const Trajectory& x) {
    return surf_copy->value(t, x.value(t));
  };
  Portfolio::ModelInfo info;
  info.family = Portfolio::ModelInfo::Family::bs;
  info.sigma = surf_copy->sigma;
  return Portfolio::from_parts(Portfolio::Kind::delta_hedge, std::move(phi),
                               surf_copy->value(0.0, x0), surf_copy->rate, 0.0,
                               std::move(value_fn), info);
}

Portfolio build_poisson_hedge(const Payoff& h, double mu, double a,
                              double horizon, int k_trunc, double x0) {
  if (!(a * mu < 0.0)) throw std::invalid_argument("series hedge requires a mu < 0");
  auto units_at = [h, mu, a, horizon, k_trunc](double t, double s) {
    const double up = tilde_F(t, (1.0 + a) * s, h, mu, a, horizon, k_trunc).value;
    const double at = tilde_F(t, s, h, mu, a, horizon, k_trunc).value;
    return (up - at) / (a * s);
  };
  StockPosition phi = [units_at](const PathSlice& s) {
    return units_at(s.time(), s.spot());
  };
  Portfolio::ValueFunctional value_fn = [h, mu, a, horizon, k_trunc, units_at](
                                            double t, const Trajectory& x) {
    const Trajectory::Evaluation e = x.evaluate(t);
    const double base = tilde_F(t, e.left, h, mu, a, horizon, k_trunc).value;
    return base + units_at(t, e.left) * (e.right - e.left);
  };
  Portfolio::ModelInfo info;
  info.family = Portfolio::ModelInfo::Family::poisson;
  info.mu = mu;
  info.a = a;
  return Portfolio::from_parts(Portfolio::Kind::poisson_series, std::move(phi),
                               tilde_F(0.0, x0, h, mu, a, horizon, k_trunc).value,
                               0.0, 0.0, std::move(value_fn), info);
}

namespace {

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Quadratic-variation mismatch diagnostic: compares the continuous part of
// the path's QV with the model's sigma^2 integral.
bool qv_mismatch(const Trajectory& x, const PartitionSequence& p,
                 const Portfolio::ModelInfo& info) {
  const auto qv = quadratic_variation(x, p, {x.horizon()});
  const double continuous = qv.continuous_part[0];
  if (info.family == Portfolio::ModelInfo::Family::poisson) {
    return continuous > 1e-4 * x.x0() * x.x0() * x.horizon();
  }
  // bs: trapezoid of sigma^2 x^2 over the master grid.
  double integral = 0.0;
  const auto& grid = x.grid();
  double prev = x.value(grid[0]);
  for (std::size_t k = 1; k < grid.size(); ++k) {
    const double cur = x.value(grid[k]);
    integral += 0.5 * (prev * prev + cur * cur) * (grid[k] - grid[k - 1]);
    prev = cur;
  }
  integral *= info.sigma * info.sigma;
  return std::abs(continuous - integral) > 0.25 * integral;
}

}  // namespace

HedgeReport replicate(const Portfolio& phi, const std::vector<Trajectory>& bundle,
                      const Payoff& h, const PartitionSequence& p,
                      const std::vector<int>& levels, int threads) {
  HedgeReport report;
  if (bundle.empty()) throw std::invalid_argument("replicate needs a nonempty bundle");

  if (phi.model_info().family != Portfolio::ModelInfo::Family::none) {
    std::size_t mismatched = 0;
    for (const Trajectory& x : bundle) {
      if (qv_mismatch(x, p, phi.model_info())) ++mismatched;
    }
    if (2 * mismatched > bundle.size()) {
      report.warnings.push_back(
          "bundle quadratic variation inconsistent with the hedge model");
    }
  }

  for (int level : levels) {
    std::vector<double> errors(bundle.size());
    std::vector<HedgeReport::Row> rows(bundle.size());
    detail::parallel_for(bundle.size(), threads, [&](std::size_t i) {
      const ValuePath vp = rollout_value(phi, bundle[i], p, level);
      const double target = payoff_value(h, bundle[i].value(bundle[i].horizon()));
      HedgeReport::Row row;
      row.level = level;
      row.path_id = i;
      row.terminal_value = vp.terminal;
      row.payoff = target;
      row.abs_error = std::abs(vp.terminal - target);
      errors[i] = row.abs_error;
      rows[i] = row;
    });
    report.rows.insert(report.rows.end(), rows.begin(), rows.end());
    HedgeReport::LevelSummary summary;
    summary.level = level;
    summary.median_error = median_of(errors);
    summary.max_error = *std::max_element(errors.begin(), errors.end());
    summary.improved = report.summary.empty()
                           ? true
                           : summary.median_error < report.summary.back().median_error;
    report.summary.push_back(summary);
  }

  // Order from the log-ratio of successive median errors.
  double order_sum = 0.0;
  int order_count = 0;
  for (std::size_t i = 0; i + 1 < report.summary.size(); ++i) {
    const auto& s0 = report.summary[i];
    const auto& s1 = report.summary[i + 1];
    if (s0.median_error > 0.0 && s1.median_error > 0.0 && s1.level != s0.level) {
      order_sum += std::log2(s0.median_error / s1.median_error) /
                   (static_cast<double>(s1.level - s0.level) * std::log2(p.base()));
      ++order_count;
    }
  }
  report.estimated_order = order_count > 0 ? order_sum / order_count : 0.0;
  return report;
}

}  // namespace pathwise
