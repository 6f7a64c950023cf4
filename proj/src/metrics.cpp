#include "pathwise/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "pathwise/detail/parallel.hpp"
#include "pathwise/detail/rng.hpp"

namespace pathwise {

namespace {

void require_same_horizon(const Trajectory& x, const Trajectory& y) {
  if (x.horizon() != y.horizon()) {
    throw std::invalid_argument("trajectories live on different horizons");
  }
}

// Piecewise-linear time warp through (0,0), the anchor pairs, (T,T).
struct Warp {
  std::vector<double> from;
  std::vector<double> to;

  static Warp identity(double horizon) {
    return Warp{{0.0, horizon}, {0.0, horizon}};
  }

  double map(double t) const { return interp(from, to, t); }
  double inv(double u) const { return interp(to, from, u); }

  double displacement() const {
    double d = 0.0;
    for (std::size_t i = 0; i < from.size(); ++i) {
      d = std::max(d, std::abs(to[i] - from[i]));
    }
    return d;
  }

  // Slope of the segment containing t (left-closed cells).
  double slope_at(double t) const {
    std::size_t k = cell(from, t);
    return (to[k + 1] - to[k]) / (from[k + 1] - from[k]);
  }

 private:
  static std::size_t cell(const std::vector<double>& xs, double t) {
    auto it = std::upper_bound(xs.begin(), xs.end(), t);
    std::size_t k = static_cast<std::size_t>(it - xs.begin());
    if (k == 0) return 0;
    if (k >= xs.size()) return xs.size() - 2;
    return k - 1;
  }

  static double interp(const std::vector<double>& xs,
                       const std::vector<double>& ys, double t) {
    const std::size_t k = cell(xs, t);
    if (t == xs[k]) return ys[k];
    if (t == xs[k + 1]) return ys[k + 1];
    const double w = (t - xs[k]) / (xs[k + 1] - xs[k]);
    return ys[k] + w * (ys[k + 1] - ys[k]);
  }
};

// Log-slope of the continuous part of x at time t (between jumps the path is
// A * exp(rate * u) on each master-grid cell).
double log_slope_at(const Trajectory& x, double t) {
  const auto& grid = x.grid();
  auto it = std::upper_bound(grid.begin(), grid.end(), t);
  std::size_t k = static_cast<std::size_t>(it - grid.begin());
  if (k == 0) k = 1;
  if (k >= grid.size()) k = grid.size() - 1;
  const double dz = x.log_cont()[k] - x.log_cont()[k - 1];
  return x.mu() + x.sigma() * dz / (grid[k] - grid[k - 1]);
}

// sup over u in [0, L] of |A e^{au} - B e^{bu}|, A, B > 0.
double segment_sup(double A, double a, double B, double b, double L) {
  double s = std::max(std::abs(A - B),
                      std::abs(A * std::exp(a * L) - B * std::exp(b * L)));
  if (a != b) {
    const double num = b * B;
    const double den = a * A;
    if (num * den > 0.0) {
      const double u = std::log(num / den) / (a - b);
      if (u > 0.0 && u < L) {
        s = std::max(s, std::abs(A * std::exp(a * u) - B * std::exp(b * u)));
      }
    }
  }
  return s;
}

// sup_t |x(t) - y(lambda(t))| evaluated exactly on the exp-linear segments
// between grid nodes, jumps and warp anchors of both paths. Evaluation
// points carry exact (t, u = lambda(t)) pairs so that jump times on either
// side are never blurred by a map/inverse round trip.
double warped_value_sup(const Trajectory& x, const Trajectory& y,
                        const Warp& warp) {
  struct EvalPoint {
    double t;
    double u;
  };
  std::vector<EvalPoint> pts;
  pts.reserve(x.grid().size() + y.grid().size() + x.jumps().size() +
              y.jumps().size() + warp.from.size());
  const double horizon = x.horizon();
  auto clamp01 = [horizon](double v) { return std::clamp(v, 0.0, horizon); };
  for (double t : x.grid()) pts.push_back({t, clamp01(warp.map(t))});
  for (const Jump& j : x.jumps()) pts.push_back({j.time, clamp01(warp.map(j.time))});
  for (double u : y.grid()) pts.push_back({clamp01(warp.inv(u)), u});
  for (const Jump& j : y.jumps()) pts.push_back({clamp01(warp.inv(j.time)), j.time});
  for (std::size_t k = 0; k < warp.from.size(); ++k) {
    pts.push_back({warp.from[k], warp.to[k]});
  }
  std::sort(pts.begin(), pts.end(), [](const EvalPoint& a, const EvalPoint& b) {
    return a.t < b.t || (a.t == b.t && a.u < b.u);
  });

  double sup = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Trajectory::Evaluation ex = x.evaluate(pts[i].t);
    const Trajectory::Evaluation ey = y.evaluate(pts[i].u);
    sup = std::max(sup, std::abs(ex.right - ey.right));
    sup = std::max(sup, std::abs(ex.left - ey.left));
    if (i + 1 < pts.size()) {
      const double len = pts[i + 1].t - pts[i].t;
      const double len_u = pts[i + 1].u - pts[i].u;
      if (len > 0.0 && len_u > 0.0) {
        const double mid_t = pts[i].t + 0.5 * len;
        const double mid_u = pts[i].u + 0.5 * len_u;
        sup = std::max(sup, segment_sup(ex.right, log_slope_at(x, mid_t), ey.right,
                                        (len_u / len) * log_slope_at(y, mid_u), len));
      }
    }
  }
  return sup;
}

double warp_cost(const Trajectory& x, const Trajectory& y, const Warp& warp) {
  return std::max(warp.displacement(), warped_value_sup(x, y, warp));
}

// Order-preserving partial matchings between the two jump index sets, each
// emitted exactly once: x-jump i is either left unmatched or paired with
// some y-jump j' >= j.
template <typename Emit>
void enumerate_matchings(std::size_t m, std::size_t n,
                         std::vector<std::pair<std::size_t, std::size_t>>& cur,
                         std::size_t i, std::size_t j, const Emit& emit,
                         std::size_t& budget) {
  if (budget == 0) return;
  if (i >= m) {
    --budget;
    emit(cur);
    return;
  }
  enumerate_matchings(m, n, cur, i + 1, j, emit, budget);
  for (std::size_t jj = j; jj < n && budget > 0; ++jj) {
    cur.emplace_back(i, jj);
    enumerate_matchings(m, n, cur, i + 1, jj + 1, emit, budget);
    cur.pop_back();
  }
}

Warp warp_from_pairs(const Trajectory& x, const Trajectory& y,
                     const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
  Warp w;
  w.from.push_back(0.0);
  w.to.push_back(0.0);
  for (const auto& [i, j] : pairs) {
    w.from.push_back(x.jumps()[i].time);
    w.to.push_back(y.jumps()[j].time);
  }
  w.from.push_back(x.horizon());
  w.to.push_back(y.horizon());
  return w;
}

}  // namespace

double uniform_distance(const Trajectory& x, const Trajectory& y) {
  require_same_horizon(x, y);
  std::vector<double> times;
  times.reserve(x.grid().size() + y.grid().size() + x.jumps().size() +
                y.jumps().size());
  times.insert(times.end(), x.grid().begin(), x.grid().end());
  times.insert(times.end(), y.grid().begin(), y.grid().end());
  for (const Jump& j : x.jumps()) times.push_back(j.time);
  for (const Jump& j : y.jumps()) times.push_back(j.time);
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());

  double sup = 0.0;
  for (double t : times) {
    const Trajectory::Evaluation ex = x.evaluate(t);
    const Trajectory::Evaluation ey = y.evaluate(t);
    sup = std::max(sup, std::abs(ex.right - ey.right));
    sup = std::max(sup, std::abs(ex.left - ey.left));
  }
  return sup;
}

double skorohod_distance(const Trajectory& x, const Trajectory& y) {
  require_same_horizon(x, y);
  const std::size_t m = x.jumps().size();
  const std::size_t n = y.jumps().size();

  double best = warp_cost(x, y, Warp::identity(x.horizon()));
  if (m == 0 && n == 0) return best;

  std::size_t budget = 100000;
  std::vector<std::pair<std::size_t, std::size_t>> cur;
  enumerate_matchings(
      m, n, cur, 0, 0,
      [&](const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
        if (pairs.empty()) return;  // identity already costed
        best = std::min(best, warp_cost(x, y, warp_from_pairs(x, y, pairs)));
      },
      budget);
  return best;
}

std::optional<JumpMatch> match_jumps(const Trajectory& x, const Trajectory& y,
                                     double epsilon) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("match_jumps epsilon must be positive");
  require_same_horizon(x, y);
  const std::size_t m = x.jumps().size();
  if (m != y.jumps().size()) return std::nullopt;
  if (m == 0) {
    // Jump-free pair: the empty pairing is complete.
    if (skorohod_distance(x, y) < epsilon) return JumpMatch{};
    return std::nullopt;
  }

  double h = std::numeric_limits<double>::infinity();
  for (const Jump& j : x.jumps()) h = std::min(h, std::abs(j.factor - 1.0));
  for (const Jump& j : y.jumps()) h = std::min(h, std::abs(j.factor - 1.0));
  const double x_min = std::min(x.grid_min(), y.grid_min());
  const double threshold = x_min * h / (2.0 * (h + 2.0));
  if (!(epsilon < threshold)) return std::nullopt;
  if (!(skorohod_distance(x, y) < epsilon)) return std::nullopt;

  JumpMatch match;
  for (std::size_t i = 0; i < m; ++i) {
    const Jump& jx = x.jumps()[i];
    const Jump& jy = y.jumps()[i];
    const double dx = x.left_value(jx.time) * (jx.factor - 1.0);
    const double dy = y.left_value(jy.time) * (jy.factor - 1.0);
    JumpMatch::Pair p;
    p.index = i + 1;
    p.time_x = jx.time;
    p.time_y = jy.time;
    p.time_shift = std::abs(jx.time - jy.time);
    p.size_gap = std::abs(dx - dy);
    match.max_time_shift = std::max(match.max_time_shift, p.time_shift);
    match.max_size_gap = std::max(match.max_size_gap, p.size_gap);
    match.pairing.push_back(p);
  }
  return match;
}

double wilson_lower_bound(std::size_t hits, std::size_t n, double z) {
  if (n == 0 || hits == 0) return 0.0;
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(hits) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double center = p + z2 / (2.0 * nn);
  const double spread = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn));
  return std::max(0.0, (center - spread) / denom);
}

namespace {

// Streaming check for the Brownian/uniform case: walk the log component and
// bail out as soon as the band around the target is left.
bool uniform_hit_streaming(const std::vector<double>& target_values,
                           const std::vector<double>& grid, double x0,
                           double sigma, double epsilon, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  double z = 0.0;
  if (std::abs(x0 - target_values[0]) >= epsilon) return false;
  for (std::size_t k = 1; k < grid.size(); ++k) {
    z += std::sqrt(grid[k] - grid[k - 1]) * gauss(rng);
    const double x = x0 * std::exp(sigma * z);
    if (std::abs(x - target_values[k]) >= epsilon) return false;
  }
  return true;
}

}  // namespace

SmallBallEstimate small_ball_estimate(const Trajectory& target,
                                      const ClassSpec& spec, Metric metric,
                                      double epsilon, std::size_t n_samples,
                                      std::uint64_t seed, int grid_level,
                                      int threads) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("small ball epsilon must be positive");
  if (n_samples < 1) throw std::invalid_argument("small ball needs n_samples >= 1");
  if (target.horizon() != spec.horizon) {
    throw std::invalid_argument("small ball target horizon differs from class horizon");
  }
  validate(spec);

  const auto* cont = std::get_if<ContinuousQVSpec>(&spec.model);
  const bool streaming = metric == Metric::uniform && cont != nullptr &&
                         std::holds_alternative<BrownianGen>(cont->generator) &&
                         target.jumps().empty();

  std::vector<double> grid, target_values;
  if (streaming) {
    const PartitionSequence p(spec.horizon, PartitionRule::dyadic, grid_level);
    grid = p.grid(grid_level);
    target_values.reserve(grid.size());
    for (double t : grid) target_values.push_back(target.value(t));
  }

  std::atomic<std::size_t> hits{0};
  detail::parallel_for(n_samples, threads, [&](std::size_t i) {
    const std::uint64_t s = detail::derive_seed(seed, i);
    bool hit;
    if (streaming) {
      hit = uniform_hit_streaming(target_values, grid, spec.x0, cont->sigma,
                                  epsilon, s);
    } else {
      const Trajectory sample = generate_trajectory(spec, grid_level, s);
      const double d = metric == Metric::uniform
                           ? uniform_distance(sample, target)
                           : skorohod_distance(sample, target);
      hit = d < epsilon;
    }
    if (hit) hits.fetch_add(1, std::memory_order_relaxed);
  });

  SmallBallEstimate est;
  est.epsilon = epsilon;
  est.metric = metric;
  est.n_samples = n_samples;
  est.hits = hits.load();
  est.hit_fraction = static_cast<double>(est.hits) / static_cast<double>(n_samples);
  est.wilson_lower_bound = wilson_lower_bound(est.hits, n_samples);
  return est;
}

}  // namespace pathwise
