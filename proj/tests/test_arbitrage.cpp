#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "pathwise/arbitrage.hpp"
#include "pathwise/hedging.hpp"

using namespace pathwise;

namespace {

const PartitionSequence kP(1.0, PartitionRule::dyadic, 12);

std::vector<Trajectory> gbm_bundle(std::size_t n, std::uint64_t seed) {
  const ClassSpec spec{1.0, 100.0, ContinuousQVSpec{0.2, BrownianGen{}}};
  return generate_bundle(spec, kP, seed, n, 2);
}

}  // namespace

TEST_CASE("financed buy-and-hold is an arbitrage on the winners-only bundle") {
  std::vector<Trajectory> bundle = gbm_bundle(64, 5);
  std::erase_if(bundle, [](const Trajectory& x) { return x.value(1.0) <= 100.0; });
  REQUIRE(bundle.size() >= 10);
  const Portfolio phi = Portfolio::buy_and_hold(1.0, 0.0, 0.0, 200.0);
  const ArbitrageVerdict verdict = scan_arbitrage(phi, bundle, kP, 10, 1e-6, 2);
  CHECK(verdict.outcome == ArbitrageVerdict::Outcome::arbitrage_found);
  REQUIRE(verdict.witness_path.has_value());
  CHECK(verdict.witness_terminal > 0.0);
  CHECK(!verdict.caveat.empty());

  // verdict soundness: the witness survives re-evaluation two levels deeper
  const Trajectory& witness = bundle[*verdict.witness_path];
  const double v = rollout_value(phi, witness, kP, 12).terminal;
  CHECK(v > verdict.tolerance / 2.0);
  CHECK(phi.initial_value() == 0.0);
}

TEST_CASE("the zero portfolio is never an arbitrage") {
  const Portfolio phi = Portfolio::zero_position(0.0, 0.0);
  const ArbitrageVerdict verdict = scan_arbitrage(phi, gbm_bundle(16, 7), kP, 8, 1e-6, 2);
  CHECK(verdict.outcome == ArbitrageVerdict::Outcome::no_arbitrage_in_bundle);
}

TEST_CASE("nonzero initial value fails the precondition") {
  const Portfolio phi = Portfolio::buy_and_hold(1.0, 5.0, 0.0, 200.0);
  const ArbitrageVerdict verdict = scan_arbitrage(phi, gbm_bundle(4, 9), kP, 8, 1e-6);
  CHECK(verdict.outcome == ArbitrageVerdict::Outcome::precondition_failed);
  CHECK(!verdict.reason.empty());
}

TEST_CASE("empty bundles are rejected") {
  const Portfolio phi = Portfolio::zero_position(0.0, 0.0);
  CHECK_THROWS_AS(scan_arbitrage(phi, {}, kP, 8, 1e-6), std::invalid_argument);
}

TEST_CASE("hedge financed at zero has mixed terminal signs") {
  const ValueSurface surf = solve_bs_pde(CallPayoff{100.0}, 0.2, 0.0, 1.0, {});
  const Portfolio hedge = build_bs_hedge(surf, 100.0).with_initial_value(0.0);
  const ArbitrageVerdict verdict =
      scan_arbitrage(hedge, gbm_bundle(128, 21), kP, 10, 0.05, 2);
  CHECK(verdict.outcome == ArbitrageVerdict::Outcome::no_arbitrage_in_bundle);
  int pos = 0, neg = 0;
  for (double v : verdict.terminals) {
    if (v > 0.0) ++pos;
    if (v < 0.0) ++neg;
  }
  CHECK(pos > 0);
  CHECK(neg > 0);
}

TEST_CASE("evidence is monotone under enlargement on the restricted class") {
  // On the winners-only class the buy-and-hold terminals stay above the
  // floor, so growing the bundle can only create a witness, never lose one.
  std::vector<Trajectory> winners = gbm_bundle(64, 11);
  std::erase_if(winners, [](const Trajectory& x) { return x.value(1.0) <= 100.0; });
  REQUIRE(winners.size() >= 8);
  const Portfolio phi = Portfolio::buy_and_hold(1.0, 0.0, 0.0, 200.0);
  bool seen_arbitrage = false;
  for (std::size_t n = 1; n <= winners.size(); ++n) {
    const std::vector<Trajectory> sub(winners.begin(), winners.begin() + n);
    const ArbitrageVerdict v = scan_arbitrage(phi, sub, kP, 8, 1e-6, 2);
    if (seen_arbitrage) {
      CHECK(v.outcome == ArbitrageVerdict::Outcome::arbitrage_found);
    }
    if (v.outcome == ArbitrageVerdict::Outcome::arbitrage_found) seen_arbitrage = true;
  }
  CHECK(seen_arbitrage);
}

TEST_CASE("dense-subset restriction does not create arbitrage") {
  // Rational rounding of the terminal value (final log node tweaked) keeps
  // the delta-hedge-minus-price scan verdict unchanged.
  const ValueSurface surf = solve_bs_pde(CallPayoff{100.0}, 0.2, 0.0, 1.0, {});
  const Portfolio hedge = build_bs_hedge(surf, 100.0).with_initial_value(0.0);
  std::vector<Trajectory> bundle = gbm_bundle(64, 33);
  std::vector<Trajectory> rounded;
  for (const Trajectory& x : bundle) {
    // x(T) rounded to 6 decimals: a member of the rational-terminal subset
    const double target = std::round(x.value(1.0) * 1e6) / 1e6;
    std::vector<double> z = x.log_cont();
    z.back() = std::log(target / (x.x0() * std::exp(x.mu() * 1.0))) / x.sigma();
    rounded.emplace_back(x.x0(), x.mu(), x.sigma(), x.grid(), z, x.jumps());
  }
  const ArbitrageVerdict base = scan_arbitrage(hedge, bundle, kP, 10, 0.05, 2);
  const ArbitrageVerdict sub = scan_arbitrage(hedge, rounded, kP, 10, 0.05, 2);
  CHECK(base.outcome == ArbitrageVerdict::Outcome::no_arbitrage_in_bundle);
  CHECK(sub.outcome == ArbitrageVerdict::Outcome::no_arbitrage_in_bundle);
}

TEST_CASE("continuity probe reproduces the jump-shift counterexample") {
  const double x0 = 1.0, mu = 0.05;
  const std::size_t cells = 256;
  auto make_portfolio = [&]() {
    std::vector<SimplePiece> pieces;
    pieces.push_back({0.5, [](double, double) { return 1.0; }, true});
    pieces.push_back({1.0, [](double, double) { return 0.0; }, true});
    return Portfolio::simple_strategy(std::move(pieces), x0, 0.0, 0.0);
  };

  SUBCASE("a > 0: plain discontinuity") {
    const double a = 0.1;
    const Trajectory base = make_geometric_poisson_path(x0, mu, a, {0.5}, 1.0, cells);
    auto perturb = [&](int n) {
      return make_geometric_poisson_path(x0, mu, a, {0.5 + 1.0 / (9 + n)}, 1.0, cells);
    };
    ContinuityProbeConfig cfg;
    cfg.gap_threshold = 0.5 * x0 * std::exp(mu / 2.0) * std::abs(a);
    const ContinuityReport rep = v_continuity_probe(
        make_portfolio(), base, perturb, Metric::skorohod, 30, kP, 10, cfg);
    CHECK(rep.verdict == ContinuityReport::Verdict::discontinuity_witness);
    const double gap = x0 * std::exp(mu / 2.0) * std::abs(a);
    for (std::size_t i = 0; i < rep.gaps.size(); ++i) {
      CHECK(rep.gaps[i] == doctest::Approx(gap).epsilon(1e-10));
      CHECK(rep.distances[i] <= 2.0 / (9.0 + static_cast<double>(i) + 1.0));
    }
  }

  SUBCASE("a < 0: one-sided gaps witness lower semicontinuity") {
    const double a = -0.1;
    const Trajectory base = make_geometric_poisson_path(x0, mu, a, {0.5}, 1.0, cells);
    auto perturb = [&](int n) {
      return make_geometric_poisson_path(x0, mu, a, {0.5 + 1.0 / (9 + n)}, 1.0, cells);
    };
    ContinuityProbeConfig cfg;
    cfg.gap_threshold = 0.5 * x0 * std::exp(mu / 2.0) * std::abs(a);
    const ContinuityReport rep = v_continuity_probe(
        make_portfolio(), base, perturb, Metric::skorohod, 30, kP, 10, cfg);
    CHECK(rep.verdict == ContinuityReport::Verdict::lower_semicontinuity_witness);
    for (double g : rep.signed_gaps) CHECK(g > 0.0);
  }

  SUBCASE("smooth markovian strategies pass the probe") {
    const double a = -0.1;
    const Trajectory base = make_geometric_poisson_path(x0, mu, a, {0.5}, 1.0, cells);
    auto perturb = [&](int n) {
      return make_geometric_poisson_path(x0, mu, a, {0.5 + 1.0 / (9 + n)}, 1.0, cells);
    };
    const Portfolio smooth = Portfolio::smooth_markovian(
        [x0](double, double x) { return x / x0; }, x0, 0.0, 0.0);
    ContinuityProbeConfig cfg;
    cfg.gap_threshold = 5e-3 * x0;
    const ContinuityReport rep = v_continuity_probe(
        smooth, base, perturb, Metric::skorohod, 30, kP, 12, cfg);
    CHECK(rep.verdict == ContinuityReport::Verdict::consistent_with_continuity);

    // Piecewise oracle for V(T): with phi = x(s-)/x0 and r = 0 the drift
    // segments integrate to (x(b-)^2 - x(a)^2) / (2 x0) and each jump adds
    // phi(s, x(s-)) (x(s) - x(s-)).
    auto terminal_oracle = [&](const Trajectory& x) {
      double v = x0;
      double lo = 0.0;
      for (const Jump& j : x.jumps()) {
        const double xa = x.value(lo), xb = x.left_value(j.time);
        v += (xb * xb - xa * xa) / (2.0 * x0);
        v += (xb / x0) * xb * (j.factor - 1.0);
        lo = j.time;
      }
      const double xa = x.value(lo), xb = x.left_value(1.0);
      v += (xb * xb - xa * xa) / (2.0 * x0);
      return v;
    };
    const double gap_oracle =
        std::abs(terminal_oracle(perturb(30)) - terminal_oracle(base));
    CHECK(rep.gaps.back() ==
          doctest::Approx(gap_oracle).epsilon(0.5).scale(1e-3 * x0));
    // gaps decay with the distances
    CHECK(rep.gaps.back() <= 2e-3 * x0);
  }
}

TEST_CASE("c0 membership diagnostics") {
  SUBCASE("generator vs its own spec passes at machine precision") {
    const ClassSpec spec{1.0, 100.0,
                         GeometricPoissonSpec{0.05, -0.1, PoissonSource{1.0}}};
    const std::vector<Trajectory> bundle = generate_bundle(spec, kP, 3, 16, 2);
    const C0Report rep = check_c0_membership(bundle, spec);
    CHECK(rep.pass_fraction == 1.0);
  }
  SUBCASE("gbm bundle passes its own sigma band at level 14") {
    const PartitionSequence p14(1.0, PartitionRule::dyadic, 14);
    const ClassSpec spec{1.0, 100.0, ContinuousQVSpec{0.2, BrownianGen{}}};
    const std::vector<Trajectory> bundle = generate_bundle(spec, p14, 5, 16, 2);
    const C0Report rep = check_c0_membership(bundle, spec);
    CHECK(rep.pass_fraction >= 0.9);
  }
  SUBCASE("mis-specified sigma fails the band") {
    const PartitionSequence p14(1.0, PartitionRule::dyadic, 14);
    const ClassSpec wrong{1.0, 100.0, ContinuousQVSpec{0.3, BrownianGen{}}};
    const std::vector<Trajectory> bundle = generate_bundle(wrong, p14, 5, 16, 2);
    const ClassSpec claimed{1.0, 100.0, ContinuousQVSpec{0.2, BrownianGen{}}};
    const C0Report rep = check_c0_membership(bundle, claimed);
    CHECK(rep.pass_fraction <= 0.1);
  }
  SUBCASE("jump-diffusion factors outside C are flagged") {
    const ClassSpec spec{1.0, 100.0,
                         JumpDiffusionSpec{0.05, 0.2, DiscreteSize{{-0.1}},
                                           ExplicitTimesSource{{0.5}}}};
    const PartitionSequence p14(1.0, PartitionRule::dyadic, 14);
    const std::vector<Trajectory> bundle = generate_bundle(spec, p14, 9, 4, 2);
    const ClassSpec other{1.0, 100.0,
                          JumpDiffusionSpec{0.05, 0.2, DiscreteSize{{0.25}},
                                            ExplicitTimesSource{{0.5}}}};
    CHECK(check_c0_membership(bundle, spec).pass_fraction >= 0.75);
    CHECK(check_c0_membership(bundle, other).pass_fraction == 0.0);
  }
}

TEST_CASE("c1 aggregation marks positive wilson bounds") {
  const ClassSpec spec{1.0, 100.0,
                       GeometricPoissonSpec{0.05, -0.1, PoissonSource{0.5}}};
  const std::vector<Trajectory> targets = {
      make_geometric_poisson_path(100.0, 0.05, 0.0, {}, 1.0, 16)};
  const auto rows = c1_evidence(targets, spec, Metric::skorohod, {0.5, 1e9}, 800, 7, 4, 2);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].pass);
  CHECK(rows[1].pass);
  CHECK(rows[1].estimate.hit_fraction == 1.0);
}
