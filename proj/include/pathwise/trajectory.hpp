#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace pathwise {

// Multiplicative jump: x(s) = x(s-) * factor, factor = 1 + a > 0.
struct Jump {
  double time;
  double factor;
};

// A strictly positive RCLL price path on [0, T]:
//
//   x(t) = x0 * exp(mu * t + sigma * z(t)) * prod_{s_i <= t} factor_i
//
// The continuous log component z is sampled on a master grid (z(0) = 0,
// linear interpolation between nodes); jumps are kept exact, off-grid.
// Immutable after construction.
class Trajectory {
 public:
  Trajectory(double x0, double mu, double sigma, std::vector<double> grid,
             std::vector<double> log_cont, std::vector<Jump> jumps);

  double x0() const { return x0_; }
  double mu() const { return mu_; }
  double sigma() const { return sigma_; }
  double horizon() const { return grid_.back(); }

  const std::vector<double>& grid() const { return grid_; }
  const std::vector<double>& log_cont() const { return log_cont_; }
  const std::vector<Jump>& jumps() const { return jumps_; }

  // Continuous log component at t, linear between master-grid nodes.
  double log_component(double t) const;

  double value(double t) const;       // x(t), jump at t included
  double left_value(double t) const;  // x(t-), jump at t excluded

  struct Evaluation {
    double left;
    double right;
    double jump;  // right - left, zero off jump times
  };
  Evaluation evaluate(double t) const;

  // Minimum of x over master-grid nodes and jump values (both sides).
  double grid_min() const;
  double grid_max() const;

  void write_csv(std::ostream& os) const;
  static Trajectory read_csv(std::istream& is);

  // Running functionals of the path over [0, t]. The continuous component is
  // exp-linear between master-grid nodes, so scanning nodes and jump values
  // is exact for min/max. `closed` includes the value at t itself; the open
  // variant uses [0, t) plus the left limit at t (predictable form).
  double running_min(double t, bool closed = true) const;
  double running_max(double t, bool closed = true) const;
  // Trapezoid time-average over [0, t] (subdivided at jumps), x0 at t = 0.
  double running_average(double t, bool closed = true) const;

 private:
  std::size_t locate_cell(double t) const;
  double jump_product_through(double t) const;  // prod over s_i <= t
  double jump_product_before(double t) const;   // prod over s_i <  t

  double x0_;
  double mu_;
  double sigma_;
  std::vector<double> grid_;
  std::vector<double> log_cont_;
  std::vector<Jump> jumps_;
  std::vector<double> jump_prefix_;  // jump_prefix_[i] = prod of first i factors
};

}  // namespace pathwise
