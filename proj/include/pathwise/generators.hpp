#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "pathwise/partitions.hpp"
#include "pathwise/trajectory.hpp"

namespace pathwise {

// --- continuous log-component generators (quadratic variation [z]_t = t) ---

struct BrownianGen {};

// z = W + B^H with H in (1/2, 1); the fractional component has zero
// quadratic variation, so [z] = [W].
struct BrownianPlusFbmGen {
  double hurst;
};

// z = rho * W + sqrt(1 - rho^2) * R, R a Brownian path reflected into
// [0, bound] (bound == 0 means one-sided reflection |B|).
struct BrownianPlusReflectedGen {
  double rho;
  double bound = 0.0;
};

using ContinuousGenerator =
    std::variant<BrownianGen, BrownianPlusFbmGen, BrownianPlusReflectedGen>;

// --- jump time sources ---

struct PoissonSource {
  double rate;  // lambda > 0
};

struct ExponentialArrival {
  double rate;
};
struct UniformArrival {
  double lo;
  double hi;  // 0 < lo < hi
};
// Inter-arrivals k/denominator with k uniform on {1, ..., max_numerator};
// support is a finite set of positive rationals.
struct RationalArrival {
  long denominator;
  long max_numerator;
};
using InterArrival =
    std::variant<ExponentialArrival, UniformArrival, RationalArrival>;

struct RenewalSource {
  InterArrival arrival;
};

struct ExplicitTimesSource {
  std::vector<double> times;  // strictly interior, increasing
};

using JumpTimeSource =
    std::variant<PoissonSource, RenewalSource, ExplicitTimesSource>;

// --- jump size samplers F_X (relative sizes a with 1 + a > 0) ---

struct ConstantSize {
  double a;
};
struct UniformSize {
  double lo;
  double hi;  // -1 < lo < hi
};
struct DiscreteSize {
  std::vector<double> values;  // finite C, equal weights
};
using JumpSizeDist = std::variant<ConstantSize, UniformSize, DiscreteSize>;

// --- trajectory class specifications ---

// x(t) = x0 exp(sigma z(t)), z a continuous path with [z]_t = t.
struct ContinuousQVSpec {
  double sigma;
  ContinuousGenerator generator = BrownianGen{};
};

// x(t) = x0 exp(mu t) (1+a)^{n(t)}.
struct GeometricPoissonSpec {
  double mu;
  double a;
  JumpTimeSource source;
};

// x(t) = x0 exp((mu - sigma^2/2) t + sigma z(t)) prod (1 + a_i), a_i ~ F_X.
struct JumpDiffusionSpec {
  double mu;
  double sigma;
  JumpSizeDist sizes;
  JumpTimeSource source;
};

using ClassModel =
    std::variant<ContinuousQVSpec, GeometricPoissonSpec, JumpDiffusionSpec>;

struct ClassSpec {
  double horizon;
  double x0;
  ClassModel model;
};

void validate(const ClassSpec& spec);

// Master grid is the finest level of `partition`; same (spec, seed) pairs
// produce bit-identical trajectories.
Trajectory generate_trajectory(const ClassSpec& spec,
                               const PartitionSequence& partition,
                               std::uint64_t seed);

// Dyadic master grid with 2^grid_level cells (no partition object needed).
Trajectory generate_trajectory(const ClassSpec& spec, int grid_level,
                               std::uint64_t seed);

// Bundle with per-path derived seeds; generation is parallel per path.
std::vector<Trajectory> generate_bundle(const ClassSpec& spec,
                                        const PartitionSequence& partition,
                                        std::uint64_t base_seed,
                                        std::size_t count, int threads = 1);

// Deterministic member of the geometric Poisson class with explicit jumps.
Trajectory make_geometric_poisson_path(double x0, double mu, double a,
                                       const std::vector<double>& jump_times,
                                       double horizon, std::size_t grid_cells);

}  // namespace pathwise
