#include "pathwise/portfolio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>
#include <mutex>
#include <ostream>
#include <stdexcept>

#include "pathwise/detail/parallel.hpp"

namespace pathwise {

double hindsight_eval(HindsightFactor factor, const Trajectory& x, double t) {
  if (t < 0.0 || t > x.horizon()) {
    throw std::invalid_argument("hindsight time outside [0, T]");
  }
  switch (factor) {
    case HindsightFactor::running_min:
      return x.running_min(t);
    case HindsightFactor::running_max:
      return x.running_max(t);
    case HindsightFactor::running_average:
      return x.running_average(t);
  }
  throw std::logic_error("unknown hindsight factor");
}

namespace {

double hindsight_predictable(HindsightFactor factor, const PathSlice& slice) {
  switch (factor) {
    case HindsightFactor::running_min:
      return slice.running_min();
    case HindsightFactor::running_max:
      return slice.running_max();
    case HindsightFactor::running_average:
      return slice.running_average();
  }
  throw std::logic_error("unknown hindsight factor");
}

}  // namespace

Portfolio Portfolio::from_parts(Kind kind, StockPosition phi, double initial_value,
                                double rate, double floor, ValueFunctional value_fn,
                                ModelInfo info) {
  if (rate < 0.0) throw std::invalid_argument("portfolio rate must be >= 0");
  if (floor < 0.0) throw std::invalid_argument("portfolio floor must be >= 0");
  Portfolio p;
  p.kind_ = kind;
  p.phi_ = std::move(phi);
  p.initial_value_ = initial_value;
  p.rate_ = rate;
  p.floor_ = floor;
  p.value_fn_ = std::move(value_fn);
  p.model_info_ = info;
  return p;
}

Portfolio Portfolio::custom(StockPosition phi, double initial_value, double rate,
                            double floor, ValueFunctional value_fn) {
  return from_parts(Kind::custom, std::move(phi), initial_value, rate, floor,
                    std::move(value_fn), {});
}

Portfolio Portfolio::zero_position(double initial_value, double rate) {
  return from_parts(
      Kind::custom, [](const PathSlice&) { return 0.0; }, initial_value, rate,
      std::max(0.0, -initial_value),
      [initial_value, rate](double t, const Trajectory&) {
        return initial_value * std::exp(rate * t);
      },
      {});
}

Portfolio Portfolio::buy_and_hold(double units, double initial_value, double rate,
                                  double floor) {
  ValueFunctional value_fn;
  if (rate == 0.0) {
    value_fn = [units, initial_value](double t, const Trajectory& x) {
      return initial_value + units * (x.value(t) - x.x0());
    };
  }
  return from_parts(
      Kind::smooth, [units](const PathSlice&) { return units; }, initial_value,
      rate, floor, std::move(value_fn), {});
}

Portfolio Portfolio::smooth_markovian(std::function<double(double, double)> g,
                                      double initial_value, double rate,
                                      double floor) {
  return from_parts(
      Kind::smooth,
      [g = std::move(g)](const PathSlice& s) { return g(s.time(), s.spot()); },
      initial_value, rate, floor, nullptr, {});
}

Portfolio Portfolio::smooth_with_hindsight(
    std::function<double(double, double, std::span<const double>)> g,
    std::vector<HindsightFactor> factors, double initial_value, double rate,
    double floor) {
  return from_parts(
      Kind::smooth,
      [g = std::move(g), factors = std::move(factors)](const PathSlice& s) {
        std::vector<double> gs(factors.size());
        for (std::size_t i = 0; i < factors.size(); ++i) {
          gs[i] = hindsight_predictable(factors[i], s);
        }
        return g(s.time(), s.spot(), std::span<const double>(gs));
      },
      initial_value, rate, floor, nullptr, {});
}

Portfolio Portfolio::simple_strategy(std::vector<SimplePiece> pieces,
                                     double initial_value, double rate,
                                     double floor) {
  if (pieces.empty()) throw std::invalid_argument("simple strategy needs pieces");
  double prev = 0.0;
  bool all_time_constant = true;
  for (const SimplePiece& piece : pieces) {
    if (!(piece.upper > prev)) {
      throw std::invalid_argument("simple strategy breakpoints must increase");
    }
    prev = piece.upper;
    all_time_constant = all_time_constant && piece.time_constant;
  }

  auto shared = std::make_shared<std::vector<SimplePiece>>(std::move(pieces));
  auto piece_at = [shared](double t) -> const SimplePiece& {
    for (const SimplePiece& piece : *shared) {
      if (t <= piece.upper) return piece;
    }
    return shared->back();
  };
  auto breakpoint_below = [shared](double t) {
    double lower = 0.0;
    for (const SimplePiece& piece : *shared) {
      if (t <= piece.upper) break;
      lower = piece.upper;
    }
    return lower;
  };

  StockPosition phi = [shared, piece_at, breakpoint_below](const PathSlice& s) {
    const double t = s.time();
    const SimplePiece& piece = piece_at(t);
    const double lower = breakpoint_below(t);
    const double x_prev = lower == 0.0 ? s.x0() : s.value(lower);
    return piece.units(t, x_prev);
  };

  ValueFunctional value_fn;
  if (all_time_constant && rate == 0.0) {
    // V(t) = V0 + sum over pieces of units * (x(s_l ^ t) - x(s_{l-1} ^ t)).
    value_fn = [shared, initial_value](double t, const Trajectory& x) {
      double v = initial_value;
      double lower = 0.0;
      for (const SimplePiece& piece : *shared) {
        if (lower >= t) break;
        const double hi = std::min(piece.upper, t);
        const double x_prev = lower == 0.0 ? x.x0() : x.value(lower);
        v += piece.units(lower, x_prev) * (x.value(hi) - x.value(lower));
        lower = piece.upper;
      }
      return v;
    };
  }
  return from_parts(Kind::simple, std::move(phi), initial_value, rate, floor,
                    std::move(value_fn), {});
}

double Portfolio::stock_units(double t, const Trajectory& x) const {
  return phi_(PathSlice(x, t));
}

double Portfolio::value_functional(double t, const Trajectory& x) const {
  if (!value_fn_) throw std::logic_error("portfolio has no closed-form value");
  return value_fn_(t, x);
}

Portfolio Portfolio::with_bond_offset(double offset) const {
  Portfolio p = *this;
  p.bond_offset_ = offset;
  return p;
}

Portfolio Portfolio::with_initial_value(double initial_value) const {
  Portfolio p = *this;
  const double shift = initial_value - initial_value_;
  p.initial_value_ = initial_value;
  if (value_fn_) {
    if (rate_ == 0.0) {
      p.value_fn_ = [fn = value_fn_, shift](double t, const Trajectory& x) {
        return fn(t, x) + shift;
      };
    } else {
      p.value_fn_ = nullptr;  // bond accrual would distort the shifted value
    }
  }
  return p;
}

double Portfolio::bond_units(double t, const Trajectory& x,
                             const PartitionSequence& p, int level) const {
  // V(t-) by the discrete recursion up to the last node before t, then a
  // partial increment ending at x(t-).
  const std::size_t cells = p.cell_count(level);
  double v = initial_value_;
  double prev_node = 0.0;
  double prev_x = x.value(0.0);
  for (std::size_t i = 1; i <= cells; ++i) {
    const double node = p.node(level, i);
    if (node >= t) break;
    const double xi = x.value(node);
    const double phi_i = stock_units(prev_node, x);
    const double psi_i = v - phi_i * prev_x;
    v += psi_i * rate_ * (node - prev_node) + phi_i * (xi - prev_x);
    prev_node = node;
    prev_x = xi;
  }
  const double phi_last = stock_units(prev_node, x);
  const double psi_last = v - phi_last * prev_x;
  const double x_left = x.left_value(t);
  v += psi_last * rate_ * (t - prev_node) + phi_last * (x_left - prev_x);
  return v - stock_units(t, x) * x_left + bond_offset_;
}

double Portfolio::terminal_value(const Trajectory& x, const PartitionSequence& p,
                                 int level) const {
  if (value_fn_) return value_fn_(x.horizon(), x);
  return rollout_value(*this, x, p, level).terminal;
}

void ValuePath::write_csv(std::ostream& os) const {
  std::string out = "t,V,phi,psi\n";
  char buf[140];
  for (std::size_t i = 0; i < times.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g\n", times[i],
                  values[i], stock[i], bond[i]);
    out += buf;
  }
  os << out;
}

ValuePath rollout_value(const Portfolio& phi, const Trajectory& x,
                        const PartitionSequence& p, int level) {
  const std::size_t cells = p.cell_count(level);
  ValuePath vp;
  vp.level = level;
  vp.times.reserve(cells + 1);
  vp.values.reserve(cells + 1);
  vp.stock.reserve(cells + 1);
  vp.bond.reserve(cells + 1);

  double v = phi.initial_value();
  double stieltjes = 0.0;
  double prev_node = p.node(level, 0);
  double prev_x = x.value(prev_node);
  for (std::size_t i = 0; i < cells; ++i) {
    const double node = p.node(level, i + 1);
    const double units = phi.stock_units(prev_node, x);
    const double bond = v - units * prev_x;
    vp.times.push_back(prev_node);
    vp.values.push_back(v);
    vp.stock.push_back(units);
    vp.bond.push_back(bond);
    const double xi = x.value(node);
    const double dt = node - prev_node;
    v += bond * phi.rate() * dt + units * (xi - prev_x);
    stieltjes += (bond + phi.bond_offset()) * phi.rate() * dt;
    prev_node = node;
    prev_x = xi;
  }
  const double units_T = phi.stock_units(prev_node, x);
  vp.times.push_back(prev_node);
  vp.values.push_back(v);
  vp.stock.push_back(units_T);
  vp.bond.push_back(v - units_T * prev_x);
  vp.terminal = v;

  const double follmer = follmer_sum(
      [&phi, &x](const PathSlice& s) { return phi.stock_units(s.time(), x); },
      x, p, level, x.horizon());
  vp.self_financing_residual =
      std::abs(vp.terminal - phi.initial_value() - stieltjes - follmer);
  return vp;
}

double self_financing_residual(const Portfolio& phi, const Trajectory& x,
                               const PartitionSequence& p, int level) {
  const ValuePath vp = rollout_value(phi, x, p, level);
  if (!phi.has_value_functional()) return vp.self_financing_residual;
  // Closed-form value against the level-discretized integrals.
  double stieltjes = 0.0;
  for (std::size_t i = 0; i + 1 < vp.times.size(); ++i) {
    stieltjes += (vp.bond[i] + phi.bond_offset()) * phi.rate() *
                 (vp.times[i + 1] - vp.times[i]);
  }
  const double follmer = follmer_sum(
      [&phi, &x](const PathSlice& s) { return phi.stock_units(s.time(), x); },
      x, p, level, x.horizon());
  return std::abs(phi.value_functional(x.horizon(), x) - phi.initial_value() -
                  stieltjes - follmer);
}

AdmissibilityReport admissibility_check(const Portfolio& phi,
                                        const std::vector<Trajectory>& bundle,
                                        const PartitionSequence& p, int level,
                                        int threads) {
  AdmissibilityReport report;
  report.floor = phi.floor();
  report.worst_value = std::numeric_limits<double>::infinity();
  std::mutex mu;
  detail::parallel_for(bundle.size(), threads, [&](std::size_t i) {
    const ValuePath vp = rollout_value(phi, bundle[i], p, level);
    double worst = std::numeric_limits<double>::infinity();
    double worst_t = 0.0;
    for (std::size_t k = 0; k < vp.values.size(); ++k) {
      if (vp.values[k] < worst) {
        worst = vp.values[k];
        worst_t = vp.times[k];
      }
    }
    std::lock_guard<std::mutex> lock(mu);
    if (worst < report.worst_value) {
      report.worst_value = worst;
      report.worst_path = i;
      report.worst_time = worst_t;
    }
  });
  report.pass = report.worst_value >= -phi.floor();
  return report;
}

}  // namespace pathwise
