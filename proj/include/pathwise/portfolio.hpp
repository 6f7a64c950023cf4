#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pathwise/calculus.hpp"
#include "pathwise/partitions.hpp"
#include "pathwise/trajectory.hpp"

namespace pathwise {

enum class HindsightFactor { running_min, running_max, running_average };

// Running min/max/average of the path over [0, t] (grid nodes plus jump
// values; exact for the exp-linear trajectory representation).
double hindsight_eval(HindsightFactor factor, const Trajectory& x, double t);

// Stock position functional phi(t, x); it sees the path only through the
// guarded PathSlice, so reading past its own time throws ContractViolation.
using StockPosition = std::function<double(const PathSlice&)>;

struct SimplePiece {
  double upper;  // piece covers (previous upper, upper]
  std::function<double(double t, double x_at_breakpoint)> units;
  bool time_constant = true;  // units ignores t (enables the exact value form)
};

// Bond/stock pair (psi, phi). Users specify phi and the initial value; the
// bond leg is always derived from the self-financing identity
// psi_t = V(t-) - phi_t x(t-).
class Portfolio {
 public:
  enum class Kind { delta_hedge, smooth, simple, poisson_series, custom };

  struct ModelInfo {
    enum class Family { none, bs, poisson } family = Family::none;
    double sigma = 0.0;  // bs
    double mu = 0.0;     // poisson
    double a = 0.0;      // poisson
  };

  using ValueFunctional = std::function<double(double t, const Trajectory& x)>;

  static Portfolio custom(StockPosition phi, double initial_value, double rate,
                          double floor, ValueFunctional value_fn = nullptr);
  static Portfolio zero_position(double initial_value, double rate);
  // phi = units held constantly; exact value form available when rate == 0.
  static Portfolio buy_and_hold(double units, double initial_value, double rate,
                                double floor);
  // phi(t, x) = G(t, x(t-)).
  static Portfolio smooth_markovian(std::function<double(double, double)> g,
                                    double initial_value, double rate,
                                    double floor);
  // phi(t, x) = G(t, x(t-), g_1(t, x), ..., g_m(t, x)).
  static Portfolio smooth_with_hindsight(
      std::function<double(double, double, std::span<const double>)> g,
      std::vector<HindsightFactor> factors, double initial_value, double rate,
      double floor);
  static Portfolio simple_strategy(std::vector<SimplePiece> pieces,
                                   double initial_value, double rate,
                                   double floor);

  Kind kind() const { return kind_; }
  double initial_value() const { return initial_value_; }
  double rate() const { return rate_; }
  double floor() const { return floor_; }
  const ModelInfo& model_info() const { return model_info_; }

  double stock_units(double t, const Trajectory& x) const;

  // psi(t) from the self-financing identity, the level rollout supplying
  // V(t-) (partial last increment taken to x(t-)).
  double bond_units(double t, const Trajectory& x, const PartitionSequence& p,
                    int level) const;

  bool has_value_functional() const { return static_cast<bool>(value_fn_); }
  double value_functional(double t, const Trajectory& x) const;

  // Exact value when available, otherwise the level rollout terminal.
  double terminal_value(const Trajectory& x, const PartitionSequence& p,
                        int level) const;

  // Test hook: shifts the reported bond leg without touching the rollout
  // recursion, deliberately breaking the self-financing identity.
  Portfolio with_bond_offset(double offset) const;
  double bond_offset() const { return bond_offset_; }

  // Same stock leg financed differently (e.g. a hedge bought with borrowed
  // cash so that V0 = 0). The closed-form value shifts by the V0 difference
  // when rate == 0 and is dropped otherwise.
  Portfolio with_initial_value(double initial_value) const;

  // Builders in hedging.cpp need the full constructor surface.
  static Portfolio from_parts(Kind kind, StockPosition phi, double initial_value,
                              double rate, double floor, ValueFunctional value_fn,
                              ModelInfo info);

 private:
  Kind kind_ = Kind::custom;
  StockPosition phi_;
  double initial_value_ = 0.0;
  double rate_ = 0.0;
  double floor_ = 0.0;
  double bond_offset_ = 0.0;
  ValueFunctional value_fn_;
  ModelInfo model_info_;
};

struct ValuePath {
  int level = 0;
  std::vector<double> times;
  std::vector<double> values;  // V at each node, values[0] = V0
  std::vector<double> stock;   // phi at each node
  std::vector<double> bond;    // psi at each node
  double terminal = 0.0;
  double self_financing_residual = 0.0;

  void write_csv(std::ostream& os) const;  // t, V, phi, psi
};

// Discrete self-financing recursion along the level-n nodes:
//   V_{i+1} = V_i + psi_i r dt + phi_i (x(t_{i+1}) - x(t_i)),
//   psi_i = V_i - phi_i x(t_i).
// The residual re-evaluates the identity through follmer_sum.
ValuePath rollout_value(const Portfolio& phi, const Trajectory& x,
                        const PartitionSequence& p, int level);

// |V(T, x) - V0 - Stieltjes(psi r) - Follmer(phi dx)| with both integrals at
// the given level; V(T, x) uses the closed-form value functional when the
// portfolio carries one.
double self_financing_residual(const Portfolio& phi, const Trajectory& x,
                               const PartitionSequence& p, int level);

struct AdmissibilityReport {
  bool pass = true;
  double floor = 0.0;
  double worst_value = 0.0;
  std::size_t worst_path = 0;
  double worst_time = 0.0;
};

AdmissibilityReport admissibility_check(const Portfolio& phi,
                                        const std::vector<Trajectory>& bundle,
                                        const PartitionSequence& p, int level,
                                        int threads = 1);

}  // namespace pathwise
