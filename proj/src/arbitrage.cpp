#include "pathwise/arbitrage.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "pathwise/calculus.hpp"
#include "pathwise/detail/parallel.hpp"
#include "pathwise/detail/rng.hpp"

namespace pathwise {

namespace {

constexpr const char* kSamplingCaveat =
    "bundle-relative evidence: sampling cannot distinguish full-measure sets "
    "from high-probability sets";

}  // namespace

ArbitrageVerdict scan_arbitrage(const Portfolio& phi,
                                const std::vector<Trajectory>& bundle,
                                const PartitionSequence& p, int level,
                                double tol, int threads) {
  if (bundle.empty()) throw std::invalid_argument("arbitrage scan needs a nonempty bundle");

  ArbitrageVerdict verdict;
  verdict.bundle_size = bundle.size();
  verdict.level = level;
  verdict.tolerance = tol;
  verdict.caveat = kSamplingCaveat;

  if (std::abs(phi.initial_value()) > 1e-12) {
    verdict.outcome = ArbitrageVerdict::Outcome::precondition_failed;
    verdict.reason = "portfolio initial value is not zero";
    return verdict;
  }

  verdict.terminals.resize(bundle.size());
  detail::parallel_for(bundle.size(), threads, [&](std::size_t i) {
    verdict.terminals[i] = rollout_value(phi, bundle[i], p, level).terminal;
  });

  double min_terminal = verdict.terminals[0];
  double max_terminal = verdict.terminals[0];
  std::size_t argmax = 0;
  for (std::size_t i = 1; i < bundle.size(); ++i) {
    min_terminal = std::min(min_terminal, verdict.terminals[i]);
    if (verdict.terminals[i] > max_terminal) {
      max_terminal = verdict.terminals[i];
      argmax = i;
    }
  }
  if (min_terminal >= -tol && max_terminal > tol) {
    verdict.outcome = ArbitrageVerdict::Outcome::arbitrage_found;
    verdict.witness_path = argmax;
    verdict.witness_terminal = max_terminal;
  } else {
    verdict.outcome = ArbitrageVerdict::Outcome::no_arbitrage_in_bundle;
  }
  return verdict;
}

ContinuityReport v_continuity_probe(const Portfolio& phi, const Trajectory& base,
                                    const std::function<Trajectory(int)>& perturb,
                                    Metric metric, int n_terms,
                                    const PartitionSequence& p, int level,
                                    const ContinuityProbeConfig& cfg) {
  if (n_terms < 2) throw std::invalid_argument("continuity probe needs >= 2 terms");

  ContinuityReport report;
  report.base_terminal = phi.terminal_value(base, p, level);

  for (int n = 1; n <= n_terms; ++n) {
    const Trajectory x = perturb(n);
    if (x.horizon() != base.horizon() || x.x0() != base.x0()) {
      throw std::invalid_argument("perturbation leaves the base trajectory class");
    }
    const double d = metric == Metric::uniform ? uniform_distance(base, x)
                                               : skorohod_distance(base, x);
    const double v = phi.terminal_value(x, p, level);
    report.distances.push_back(d);
    report.signed_gaps.push_back(v - report.base_terminal);
    report.gaps.push_back(std::abs(v - report.base_terminal));
  }

  const double d_first = report.distances.front();
  const double d_last = report.distances.back();
  const bool distances_vanish = d_last <= cfg.distance_shrink * d_first;
  const double min_gap = *std::min_element(report.gaps.begin(), report.gaps.end());

  if (distances_vanish && min_gap >= cfg.gap_threshold) {
    const bool one_sided =
        std::all_of(report.signed_gaps.begin(), report.signed_gaps.end(),
                    [&](double g) { return g >= -cfg.rho; });
    report.verdict = one_sided
                         ? ContinuityReport::Verdict::lower_semicontinuity_witness
                         : ContinuityReport::Verdict::discontinuity_witness;
  } else {
    report.verdict = ContinuityReport::Verdict::consistent_with_continuity;
  }
  return report;
}

namespace {

// Relative deviation of the continuous QV part from the sigma^2 x^2 integral
// on the trajectory's master grid.
double qv_relative_deviation(const Trajectory& x, double sigma) {
  const auto& grid = x.grid();
  double qv_total = 0.0;
  double integral = 0.0;
  double prev = x.value(grid[0]);
  for (std::size_t k = 1; k < grid.size(); ++k) {
    const double cur = x.value(grid[k]);
    qv_total += (cur - prev) * (cur - prev);
    integral += 0.5 * (prev * prev + cur * cur) * (grid[k] - grid[k - 1]);
    prev = cur;
  }
  double atomic = 0.0;
  for (const Jump& j : x.jumps()) {
    const double dj = x.left_value(j.time) * (j.factor - 1.0);
    atomic += dj * dj;
  }
  integral *= sigma * sigma;
  return std::abs(qv_total - atomic - integral) / integral;
}

bool factor_in_class(double a, const JumpSizeDist& sizes, double tol) {
  if (const auto* c = std::get_if<ConstantSize>(&sizes)) {
    return std::abs(a - c->a) <= tol;
  }
  if (const auto* u = std::get_if<UniformSize>(&sizes)) {
    return a >= u->lo - tol && a <= u->hi + tol;
  }
  const auto& d = std::get<DiscreteSize>(sizes);
  for (double v : d.values) {
    if (std::abs(a - v) <= tol) return true;
  }
  return false;
}

}  // namespace

C0Report check_c0_membership(const std::vector<Trajectory>& bundle,
                             const ClassSpec& spec, const C0Tolerances& tol) {
  validate(spec);
  C0Report report;
  report.paths.reserve(bundle.size());
  std::size_t passed = 0;

  for (const Trajectory& x : bundle) {
    C0Report::PathResult result;
    if (const auto* c = std::get_if<ContinuousQVSpec>(&spec.model)) {
      if (!x.jumps().empty()) {
        result.pass = false;
        result.detail = "continuous class member carries jumps";
      } else {
        result.qv_relative_dev = qv_relative_deviation(x, c->sigma);
        result.pass = result.qv_relative_dev <= tol.qv_band;
        if (!result.pass) result.detail = "quadratic variation outside the sigma band";
      }
    } else if (const auto* g = std::get_if<GeometricPoissonSpec>(&spec.model)) {
      result.pass = true;
      for (const Jump& j : x.jumps()) {
        if (std::abs(j.factor - (1.0 + g->a)) > tol.factor_tol) {
          result.pass = false;
          result.detail = "jump factor differs from 1+a";
          break;
        }
      }
      if (result.pass) {
        // Node exactness of x(t) = x0 e^{mu t} (1+a)^{n(t)}.
        for (double t : x.grid()) {
          std::size_t n_t = 0;
          for (const Jump& j : x.jumps()) {
            if (j.time <= t) ++n_t;
            else break;
          }
          const double model = spec.x0 * std::exp(g->mu * t) *
                               std::pow(1.0 + g->a, static_cast<double>(n_t));
          if (std::abs(x.value(t) - model) > tol.exactness * std::abs(model)) {
            result.pass = false;
            result.detail = "node value deviates from the counting-function form";
            break;
          }
        }
      }
    } else {
      const auto& jd = std::get<JumpDiffusionSpec>(spec.model);
      result.qv_relative_dev = qv_relative_deviation(x, jd.sigma);
      result.pass = result.qv_relative_dev <= tol.qv_band;
      if (!result.pass) {
        result.detail = "continuous quadratic variation outside the sigma band";
      } else {
        for (const Jump& j : x.jumps()) {
          if (!factor_in_class(j.factor - 1.0, jd.sizes, tol.factor_tol)) {
            result.pass = false;
            result.detail = "jump size outside the class set C";
            break;
          }
        }
      }
    }
    if (result.pass) ++passed;
    report.paths.push_back(std::move(result));
  }
  report.pass_fraction = bundle.empty()
                             ? 0.0
                             : static_cast<double>(passed) /
                                   static_cast<double>(bundle.size());
  return report;
}

std::vector<C1Row> c1_evidence(const std::vector<Trajectory>& targets,
                               const ClassSpec& spec, Metric metric,
                               const std::vector<double>& eps_grid,
                               std::size_t n_samples, std::uint64_t seed,
                               int grid_level, int threads) {
  std::vector<C1Row> rows;
  for (std::size_t ti = 0; ti < targets.size(); ++ti) {
    for (double eps : eps_grid) {
      C1Row row;
      row.target_id = ti;
      row.epsilon = eps;
      row.estimate = small_ball_estimate(targets[ti], spec, metric, eps, n_samples,
                                         detail::derive_seed(seed, ti), grid_level,
                                         threads);
      row.pass = row.estimate.wilson_lower_bound > 0.0;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

}  // namespace pathwise
