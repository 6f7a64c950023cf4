#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include "pathwise/generators.hpp"
#include "pathwise/hedging.hpp"

using namespace pathwise;

namespace {

double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double bs_call(double spot, double strike, double rate, double sigma, double tau) {
  if (tau <= 0.0) return std::max(spot - strike, 0.0);
  const double sq = sigma * std::sqrt(tau);
  const double d1 = (std::log(spot / strike) + (rate + 0.5 * sigma * sigma) * tau) / sq;
  return spot * norm_cdf(d1) - strike * std::exp(-rate * tau) * norm_cdf(d1 - sq);
}

Payoff linear_payoff() {
  // h(x) = x as a wide tabulated payoff (linear extension keeps it exact)
  return TabulatedPayoff{{0.0, 1000.0}, {0.0, 1000.0}, 1.0};
}

const PartitionSequence kP(1.0, PartitionRule::dyadic, 12);

}  // namespace

TEST_CASE("pde call price matches the closed form at the money") {
  const ValueSurface surf = solve_bs_pde(CallPayoff{100.0}, 0.2, 0.0, 1.0, {});
  const double oracle = bs_call(100.0, 100.0, 0.0, 0.2, 1.0);
  CHECK(std::abs(surf.value(0.0, 100.0) - oracle) <= 1e-3 * oracle);
  // and with interest
  PdeGridSpec grid;
  grid.center = 100.0;
  const ValueSurface surf_r = solve_bs_pde(CallPayoff{100.0}, 0.2, 0.03, 1.0, grid);
  const double oracle_r = bs_call(100.0, 100.0, 0.03, 0.2, 1.0);
  CHECK(std::abs(surf_r.value(0.0, 100.0) - oracle_r) <= 1e-3 * oracle_r);
}

TEST_CASE("pde delta matches the closed form at the money") {
  const ValueSurface surf = solve_bs_pde(CallPayoff{100.0}, 0.2, 0.0, 1.0, {});
  const double d1 = (0.5 * 0.2 * 0.2) / 0.2;
  CHECK(std::abs(surf.delta_at(0.0, 100.0) - norm_cdf(d1)) <= 1e-2);
}

TEST_CASE("terminal row is the exact payoff") {
  const ValueSurface surf = solve_bs_pde(PutPayoff{95.0}, 0.25, 0.01, 2.0, {});
  const std::size_t last = surf.times.size() - 1;
  for (std::size_t i = 0; i < surf.log_space.size(); ++i) {
    const double x = std::exp(surf.log_space[i]);
    CHECK(surf.values[last][i] == payoff_value(PutPayoff{95.0}, x));
  }
}

TEST_CASE("vanishing diffusion approaches the intrinsic value") {
  PdeGridSpec grid;
  grid.center = 100.0;
  grid.space_cells = 1600;
  grid.log_lo = std::log(40.0);
  grid.log_hi = std::log(250.0);
  const ValueSurface surf = solve_bs_pde(CallPayoff{100.0}, 0.01, 0.0, 1.0, grid);
  CHECK(std::abs(surf.value(0.0, 120.0) - 20.0) <= 0.05);
  CHECK(surf.value(0.0, 80.0) <= 0.05);
}

TEST_CASE("surfaces of non-negative payoffs stay non-negative") {
  const ValueSurface call = solve_bs_pde(CallPayoff{100.0}, 0.2, 0.0, 1.0, {});
  for (const auto& row : call.values) {
    for (double v : row) CHECK(v >= 0.0);
  }
}

TEST_CASE("pde rejects bad parameters and flags narrow bands") {
  CHECK_THROWS_AS(solve_bs_pde(CallPayoff{100.0}, 0.0, 0.0, 1.0, {}),
                  std::invalid_argument);
  CHECK_THROWS_AS(solve_bs_pde(CallPayoff{100.0}, 0.2, 0.0, -1.0, {}),
                  std::invalid_argument);
  PdeGridSpec tiny;
  tiny.space_cells = 4;
  CHECK_THROWS_AS(solve_bs_pde(CallPayoff{100.0}, 0.2, 0.0, 1.0, tiny),
                  std::invalid_argument);
  PdeGridSpec narrow;
  narrow.log_lo = std::log(95.0);
  narrow.log_hi = std::log(105.0);
  const ValueSurface surf = solve_bs_pde(CallPayoff{100.0}, 0.2, 0.0, 1.0, narrow);
  CHECK(!surf.warnings.empty());
}

TEST_CASE("surface queries outside the domain raise") {
  const ValueSurface surf = solve_bs_pde(CallPayoff{100.0}, 0.2, 0.0, 1.0, {});
  CHECK_THROWS_AS(surf.value(0.5, 1e9), std::out_of_range);
  CHECK_THROWS_AS(surf.delta_at(0.5, 1e-9), std::out_of_range);
}

TEST_CASE("series value at maturity is the payoff") {
  const TildeF f = tilde_F(1.0, 87.3, CallPayoff{80.0}, 0.05, -0.1, 1.0, 10);
  CHECK(f.value == doctest::Approx(7.3).epsilon(1e-14));
  CHECK(f.tail_bound <= 1e-12);
}

TEST_CASE("series identity: the stock payoff prices to s") {
  for (double t : {0.0, 0.4, 0.99}) {
    for (double s : {20.0, 100.0, 431.7}) {
      const TildeF f = tilde_F(t, s, linear_payoff(), 0.05, -0.1, 1.0, 60);
      CHECK(std::abs(f.value - s) <= 1e-10 * s);
    }
  }
}

TEST_CASE("series truncation error is covered by the reported tail bound") {
  const Payoff call = CallPayoff{100.0};
  const TildeF full = tilde_F(0.0, 100.0, call, 0.05, -0.1, 1.0, 60);
  for (int k : {2, 4, 8}) {
    const TildeF trunc = tilde_F(0.0, 100.0, call, 0.05, -0.1, 1.0, k);
    CHECK(std::abs(trunc.value - full.value) <= trunc.tail_bound);
  }
}

TEST_CASE("series value matches a monte carlo expectation") {
  // Oracle: E[h(s e^{mu tau} (1+a)^N)], N ~ Poisson(lambda tau).
  const double mu = 0.05, a = -0.1, lambda = 0.5, s = 100.0, tau = 1.0;
  std::mt19937_64 rng(2024);
  std::poisson_distribution<int> pois(lambda * tau);
  const std::size_t n = 1000000;
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const int k = pois(rng);
    const double v = payoff_value(CallPayoff{100.0},
                                  s * std::exp(mu * tau) * std::pow(1.0 + a, k));
    sum += v;
    sum_sq += v * v;
  }
  const double mean = sum / n;
  const double se = std::sqrt((sum_sq / n - mean * mean) / n);
  const TildeF f = tilde_F(0.0, s, CallPayoff{100.0}, mu, a, 1.0, 60);
  CHECK(std::abs(f.value - mean) <= 3.0 * se);
}

TEST_CASE("series hedge validation") {
  CHECK_THROWS_AS(tilde_F(0.0, 100.0, CallPayoff{100.0}, 0.05, 0.1, 1.0, 60),
                  std::invalid_argument);
  CHECK_THROWS_AS(build_poisson_hedge(CallPayoff{100.0}, -0.05, -0.1, 1.0, 60, 100.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(tilde_F(0.0, 100.0, CallPayoff{100.0}, 0.05, -0.1, 1.0, 0),
                  std::invalid_argument);
}

TEST_CASE("stock payoff is hedged by holding one share") {
  const Portfolio phi = build_poisson_hedge(linear_payoff(), 0.05, -0.1, 1.0, 60, 100.0);
  CHECK(phi.initial_value() == doctest::Approx(100.0).epsilon(1e-10));
  const Trajectory y = make_geometric_poisson_path(100.0, 0.05, -0.1, {0.3, 0.7}, 1.0, 64);
  for (double t : {0.0, 0.3, 0.55, 0.9}) {
    CHECK(phi.stock_units(t, y) == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("delta hedge replicates the call on a gbm bundle") {
  const ClassSpec spec{1.0, 100.0, ContinuousQVSpec{0.2, BrownianGen{}}};
  const std::vector<Trajectory> bundle = generate_bundle(spec, kP, 31, 16, 2);
  const ValueSurface surf = solve_bs_pde(CallPayoff{100.0}, 0.2, 0.0, 1.0, {});
  const Portfolio hedge = build_bs_hedge(surf, 100.0);
  CHECK(hedge.initial_value() == doctest::Approx(bs_call(100, 100, 0, 0.2, 1)).epsilon(1e-3));

  const HedgeReport report = replicate(hedge, bundle, CallPayoff{100.0}, kP, {8, 12}, 2);
  REQUIRE(report.summary.size() == 2);
  CHECK(report.summary[1].median_error < report.summary[0].median_error);
  CHECK(report.summary[1].median_error <= 1e-2 * 100.0);
  CHECK(report.estimated_order > 0.2);
  CHECK(report.warnings.empty());
  for (const auto& row : report.rows) CHECK(row.abs_error >= 0.0);
}

TEST_CASE("replication is robust across class members") {
  // A zero-quadratic-variation perturbation of the log component leaves the
  // hedge-error behavior intact: medians within a factor of 3 per level.
  const ClassSpec bm{1.0, 100.0, ContinuousQVSpec{0.2, BrownianGen{}}};
  const ClassSpec mixed{1.0, 100.0,
                        ContinuousQVSpec{0.2, BrownianPlusFbmGen{0.75}}};
  const ValueSurface surf = solve_bs_pde(CallPayoff{100.0}, 0.2, 0.0, 1.0, {});
  const Portfolio hedge = build_bs_hedge(surf, 100.0);
  const std::vector<int> levels = {8, 10};
  const HedgeReport rep_bm =
      replicate(hedge, generate_bundle(bm, kP, 51, 32, 2), CallPayoff{100.0}, kP,
                levels, 2);
  const HedgeReport rep_mixed =
      replicate(hedge, generate_bundle(mixed, kP, 51, 32, 2), CallPayoff{100.0},
                kP, levels, 2);
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const double ratio =
        rep_mixed.summary[i].median_error / rep_bm.summary[i].median_error;
    CHECK(ratio <= 3.0);
    CHECK(ratio >= 1.0 / 3.0);
  }
}

TEST_CASE("volatility mismatch triggers the qv warning") {
  const ClassSpec wrong{1.0, 100.0, ContinuousQVSpec{0.3, BrownianGen{}}};
  const std::vector<Trajectory> bundle = generate_bundle(wrong, kP, 77, 8, 2);
  const ValueSurface surf = solve_bs_pde(CallPayoff{100.0}, 0.2, 0.0, 1.0, {});
  const Portfolio hedge = build_bs_hedge(surf, 100.0);
  const HedgeReport report = replicate(hedge, bundle, CallPayoff{100.0}, kP, {8}, 2);
  CHECK(!report.warnings.empty());
}

TEST_CASE("series hedge replicates on explicit-jump paths") {
  const Payoff call = CallPayoff{100.0};
  const Portfolio hedge = build_poisson_hedge(call, 0.05, -0.1, 1.0, 60, 100.0);
  const ClassSpec spec{1.0, 100.0,
                       GeometricPoissonSpec{0.05, -0.1, PoissonSource{0.5}}};
  std::vector<Trajectory> bundle = generate_bundle(spec, kP, 13, 16, 2);
  std::erase_if(bundle, [](const Trajectory& x) { return x.jumps().size() > 5; });
  REQUIRE(!bundle.empty());
  const HedgeReport report = replicate(hedge, bundle, call, kP, {12}, 2);
  CHECK(report.summary[0].max_error <= 1e-3 * 100.0);
  CHECK(report.warnings.empty());
}

TEST_CASE("zero payoff with a zero portfolio has zero error") {
  const Payoff zero = TabulatedPayoff{{0.0, 1000.0}, {0.0, 0.0}, 0.0};
  const Portfolio phi = Portfolio::zero_position(0.0, 0.0);
  const ClassSpec spec{1.0, 100.0, ContinuousQVSpec{0.2, BrownianGen{}}};
  const std::vector<Trajectory> bundle = generate_bundle(spec, kP, 3, 4, 2);
  const HedgeReport report = replicate(phi, bundle, zero, kP, {6}, 2);
  for (const auto& row : report.rows) CHECK(row.abs_error == 0.0);
}

TEST_CASE("node-aligned jumps leave only truncation and step error") {
  const Payoff call = CallPayoff{100.0};
  // jumps exactly at level-12 partition nodes
  const Trajectory x =
      make_geometric_poisson_path(100.0, 0.05, -0.1, {0.25, 0.5}, 1.0, 1 << 12);
  SUBCASE("generous truncation leaves only the time-step error") {
    const Portfolio hedge = build_poisson_hedge(call, 0.05, -0.1, 1.0, 60, 100.0);
    const double v = rollout_value(hedge, x, kP, 12).terminal;
    CHECK(std::abs(v - payoff_value(call, x.value(1.0))) <= 1e-3 * 100.0);
  }
  SUBCASE("coarse truncation is covered by the tail bound") {
    const Portfolio hedge = build_poisson_hedge(call, 0.05, -0.1, 1.0, 4, 100.0);
    const double v = rollout_value(hedge, x, kP, 12).terminal;
    const double tail = tilde_F(0.0, 100.0, call, 0.05, -0.1, 1.0, 4).tail_bound;
    CHECK(std::abs(v - payoff_value(call, x.value(1.0))) <= tail + 1e-3 * 100.0);
  }
}
