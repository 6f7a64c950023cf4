#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "pathwise/generators.hpp"
#include "pathwise/trajectory.hpp"

namespace pathwise {

enum class Metric { uniform, skorohod };

// sup |x - y| over the union of both master grids and both jump-time sets,
// comparing left and right values at every time.
double uniform_distance(const Trajectory& x, const Trajectory& y);

// Structural Skorohod distance: minimum over piecewise-linear time warps
// anchored at order-preserving (partial) jump pairings of
//   max( sup |lambda(t) - t|, sup |x(t) - y(lambda(t))| ).
// For equal jump counts this searches every feasible pairing; for unequal
// counts the unmatched jumps stay in the value sup, so the result is a
// certified upper bound on the infimum.
double skorohod_distance(const Trajectory& x, const Trajectory& y);

struct JumpMatch {
  struct Pair {
    std::size_t index;   // 1-based pair index
    double time_x;
    double time_y;
    double time_shift;   // |time_x - time_y|
    double size_gap;     // | dx(time_x) - dy(time_y) |
  };
  std::vector<Pair> pairing;
  double max_time_shift = 0.0;
  double max_size_gap = 0.0;
};

// Order-preserving jump pairing when the paths are provably close: requires
// equal jump counts and skorohod_distance(x, y) < epsilon with epsilon below
// the x_min h / (2(h+2)) threshold, h the smallest relative jump size seen
// on either path. Otherwise nullopt.
std::optional<JumpMatch> match_jumps(const Trajectory& x, const Trajectory& y,
                                     double epsilon);

struct SmallBallEstimate {
  double epsilon = 0.0;
  Metric metric = Metric::uniform;
  std::size_t n_samples = 0;
  std::size_t hits = 0;
  double hit_fraction = 0.0;
  double wilson_lower_bound = 0.0;  // 95% lower confidence bound
};

// Monte Carlo frequency of class samples landing within epsilon of the
// target under the chosen metric. Samples use per-index derived seeds, so
// the result does not depend on the thread count.
SmallBallEstimate small_ball_estimate(const Trajectory& target,
                                      const ClassSpec& spec, Metric metric,
                                      double epsilon, std::size_t n_samples,
                                      std::uint64_t seed, int grid_level = 10,
                                      int threads = 1);

double wilson_lower_bound(std::size_t hits, std::size_t n, double z = 1.959963984540054);

}  // namespace pathwise
