#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pathwise/generators.hpp"
#include "pathwise/metrics.hpp"
#include "pathwise/portfolio.hpp"

namespace pathwise {

struct ArbitrageVerdict {
  enum class Outcome {
    arbitrage_found,
    no_arbitrage_in_bundle,
    precondition_failed
  };
  Outcome outcome = Outcome::no_arbitrage_in_bundle;
  std::string reason;  // set on precondition_failed
  std::optional<std::size_t> witness_path;
  double witness_terminal = 0.0;
  std::size_t bundle_size = 0;
  int level = 0;
  double tolerance = 0.0;
  std::vector<double> terminals;
  // A bundle verdict is sampling evidence only; it can never certify a
  // full-measure statement about the class.
  std::string caveat;
};

// Zero-initial-value scan: arbitrage_found needs every terminal >= -tol and
// at least one terminal > +tol.
ArbitrageVerdict scan_arbitrage(const Portfolio& phi,
                                const std::vector<Trajectory>& bundle,
                                const PartitionSequence& p, int level,
                                double tol, int threads = 1);

struct ContinuityProbeConfig {
  double gap_threshold = 1e-6;  // gap regarded as a genuine discontinuity
  double rho = 1e-9;            // one-sidedness slack
  double distance_shrink = 0.5; // distances must fall below shrink * d_1
};

struct ContinuityReport {
  enum class Verdict {
    consistent_with_continuity,
    discontinuity_witness,
    lower_semicontinuity_witness
  };
  Verdict verdict = Verdict::consistent_with_continuity;
  double base_terminal = 0.0;
  std::vector<double> distances;
  std::vector<double> gaps;         // |V_T(x_n) - V_T(base)|
  std::vector<double> signed_gaps;  // V_T(x_n) - V_T(base)
};

// Tabulates (d(x_n, base), terminal gap) along a perturbation sequence and
// classifies. Terminal values use the portfolio's closed-form value when it
// has one, the level rollout otherwise.
ContinuityReport v_continuity_probe(const Portfolio& phi, const Trajectory& base,
                                    const std::function<Trajectory(int)>& perturb,
                                    Metric metric, int n_terms,
                                    const PartitionSequence& p, int level,
                                    const ContinuityProbeConfig& cfg = {});

struct C0Tolerances {
  double qv_band = 0.05;      // relative band for the sigma^2 x^2 identity
  double exactness = 1e-9;    // relative node exactness for pure-jump paths
  double factor_tol = 1e-9;   // jump-size membership slack
};

struct C0Report {
  struct PathResult {
    bool pass = true;
    double qv_relative_dev = 0.0;
    std::string detail;
  };
  std::vector<PathResult> paths;
  double pass_fraction = 0.0;
};

// Per-path class diagnostics computed on the trajectory's own master grid.
C0Report check_c0_membership(const std::vector<Trajectory>& bundle,
                             const ClassSpec& spec,
                             const C0Tolerances& tol = {});

struct C1Row {
  std::size_t target_id = 0;
  double epsilon = 0.0;
  SmallBallEstimate estimate;
  bool pass = false;  // Wilson lower bound strictly positive
};

// Aggregates small-ball estimates over a (target x epsilon) grid.
std::vector<C1Row> c1_evidence(const std::vector<Trajectory>& targets,
                               const ClassSpec& spec, Metric metric,
                               const std::vector<double>& eps_grid,
                               std::size_t n_samples, std::uint64_t seed,
                               int grid_level = 10, int threads = 1);

}  // namespace pathwise
