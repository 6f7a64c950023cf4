#pragma once

#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "pathwise/partitions.hpp"
#include "pathwise/trajectory.hpp"

namespace pathwise {

// Raised when an integrand or strategy reads path values it may not see yet.
struct ContractViolation : std::logic_error {
  using std::logic_error::logic_error;
};

// Guarded view of a trajectory handed to integrands evaluated at time s:
// only the strict past and the left limit at s are readable.
class PathSlice {
 public:
  PathSlice(const Trajectory& x, double cutoff) : x_(&x), cutoff_(cutoff) {}

  double time() const { return cutoff_; }
  double x0() const { return x_->x0(); }
  double horizon() const { return x_->horizon(); }

  double value(double t) const {
    if (t >= cutoff_ && t != 0.0) {
      throw ContractViolation("integrand read x(t) at t >= its own time");
    }
    return x_->value(t);
  }

  double left_value(double t) const {
    if (t > cutoff_) {
      throw ContractViolation("integrand read x(t-) beyond its own time");
    }
    return x_->left_value(t);
  }

  // x(s-), the freshest predictable price.
  double spot() const { return x_->left_value(cutoff_); }

  // Predictable hindsight values over [0, s) plus the left limit at s.
  double running_min() const { return x_->running_min(cutoff_, false); }
  double running_max() const { return x_->running_max(cutoff_, false); }
  double running_average() const { return x_->running_average(cutoff_, false); }

 private:
  const Trajectory* x_;
  double cutoff_;
};

using Integrand = std::function<double(const PathSlice&)>;

struct ConvergenceTable {
  std::vector<int> levels;          // strictly increasing
  std::vector<double> values;       // approximant per level
  std::vector<double> cauchy_gaps;  // |values[i] - values[i-1]|, one per level after the first
  double tolerance = 0.0;
  bool converged = false;
  std::optional<double> limit;  // last value when converged
};

// Level-n left-endpoint sum against the path increments:
//   sum over cells [t_i, t_{i+1}] contained in [0, t] of
//   y(t_i, x) (x(t_{i+1}) - x(t_i)).
// For t = T the integral is improper (limit of proper integrals up to
// T - mesh(n)); on these uniform grids that keeps every cell and never
// evaluates y at T itself.
double follmer_sum(const Integrand& y, const Trajectory& x,
                   const PartitionSequence& p, int level, double t);

// Table of follmer_sum over levels 1..max_level with a Cauchy convergence
// flag; divergence is reported through converged=false, never thrown.
ConvergenceTable follmer_integral(const Integrand& y, const Trajectory& x,
                                  const PartitionSequence& p, double t,
                                  double tol);

struct QVDecomposition {
  std::vector<double> times;
  std::vector<double> total;            // [x]_t, finest-level discrete sum
  std::vector<double> continuous_part;  // <x>_t = total - atomic
  std::vector<double> atomic_part;      // sum of squared jumps through t
};

QVDecomposition quadratic_variation(const Trajectory& x,
                                    const PartitionSequence& p,
                                    const std::vector<double>& eval_times);

// f(t, x, y1..ym) with the derivatives the pathwise change-of-variable
// formula needs; y are continuous bounded-variation companion paths.
struct SmoothFunction {
  using Fn = std::function<double(double t, double x, std::span<const double> y)>;
  Fn value;
  Fn dt;
  Fn dx;
  Fn dxx;
  std::vector<Fn> dy;
};

SmoothFunction make_power_function(int power);  // f(t, x) = x^power

using PathFunction = std::function<double(const Trajectory&, double)>;

// |LHS - RHS| of the pathwise change-of-variable identity with every
// integral discretized at `level` and the jump sum taken over stored jumps.
double ito_follmer_residual(const SmoothFunction& f, const Trajectory& x,
                            const std::vector<PathFunction>& hindsight,
                            const PartitionSequence& p, int level,
                            double t = -1.0);

}  // namespace pathwise
