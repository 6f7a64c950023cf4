#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "pathwise/generators.hpp"
#include "pathwise/partitions.hpp"

using namespace pathwise;

namespace {

// Discrete quadratic variation of the stored log component.
double log_qv(const Trajectory& x) {
  const auto& z = x.log_cont();
  double qv = 0.0;
  for (std::size_t k = 1; k < z.size(); ++k) {
    qv += (z[k] - z[k - 1]) * (z[k] - z[k - 1]);
  }
  return qv;
}

}  // namespace

TEST_CASE("explicit-times geometric path matches the closed form") {
  const ClassSpec spec{1.0, 100.0,
                       GeometricPoissonSpec{0.05, -0.1, ExplicitTimesSource{{0.5}}}};
  const PartitionSequence p(1.0, PartitionRule::dyadic, 8);
  const Trajectory x = generate_trajectory(spec, p, 7);
  for (double t : p.grid(8)) {
    const double expected =
        100.0 * std::exp(0.05 * t) * (t >= 0.5 ? 0.9 : 1.0);
    CHECK(x.value(t) == doctest::Approx(expected).epsilon(1e-15));
  }
}

TEST_CASE("brownian class paths start at x0 and stay positive") {
  const ClassSpec spec{1.0, 100.0, ContinuousQVSpec{0.2, BrownianGen{}}};
  const Trajectory x = generate_trajectory(spec, 10, 3);
  CHECK(x.value(0.0) == 100.0);
  CHECK(x.jumps().empty());
  CHECK(x.grid_min() > 0.0);
}

TEST_CASE("determinism: same spec and seed give bit-identical paths") {
  const ClassSpec spec{2.0, 50.0,
                       JumpDiffusionSpec{0.03, 0.25, DiscreteSize{{-0.1, 0.08}},
                                         PoissonSource{1.5}}};
  const Trajectory a = generate_trajectory(spec, 9, 1234);
  const Trajectory b = generate_trajectory(spec, 9, 1234);
  REQUIRE(a.grid().size() == b.grid().size());
  for (std::size_t k = 0; k < a.grid().size(); ++k) {
    CHECK(a.log_cont()[k] == b.log_cont()[k]);
  }
  REQUIRE(a.jumps().size() == b.jumps().size());
  for (std::size_t i = 0; i < a.jumps().size(); ++i) {
    CHECK(a.jumps()[i].time == b.jumps()[i].time);
    CHECK(a.jumps()[i].factor == b.jumps()[i].factor);
  }
  const Trajectory c = generate_trajectory(spec, 9, 1235);
  CHECK(a.log_cont().back() != c.log_cont().back());
}

TEST_CASE("fbm perturbation keeps [z] close to t at level 14") {
  // The H > 1/2 component has vanishing quadratic variation, so the sampled
  // [z]_T must match the Brownian value T within a few percent.
  const ClassSpec spec{1.0, 100.0,
                       ContinuousQVSpec{0.2, BrownianPlusFbmGen{0.75}}};
  int within = 0;
  const int trials = 8;
  for (int s = 0; s < trials; ++s) {
    const Trajectory x = generate_trajectory(spec, 14, 100 + s);
    const double qv = log_qv(x);
    if (std::abs(qv - 1.0) < 0.05) ++within;
  }
  CHECK(within >= trials - 1);
}

TEST_CASE("reflected mix keeps [z] close to t and respects the bound") {
  const ClassSpec spec{1.0, 100.0,
                       ContinuousQVSpec{0.2, BrownianPlusReflectedGen{0.6, 1.5}}};
  const Trajectory x = generate_trajectory(spec, 14, 5);
  CHECK(std::abs(log_qv(x) - 1.0) < 0.08);
}

TEST_CASE("invalid specs are rejected") {
  CHECK_THROWS_AS(
      generate_trajectory(
          ClassSpec{1.0, 100.0, ContinuousQVSpec{0.2, BrownianPlusFbmGen{0.5}}}, 6, 1),
      std::invalid_argument);
  CHECK_THROWS_AS(
      generate_trajectory(
          ClassSpec{1.0, 100.0, ContinuousQVSpec{0.2, BrownianPlusFbmGen{1.2}}}, 6, 1),
      std::invalid_argument);
  CHECK_THROWS_AS(
      generate_trajectory(
          ClassSpec{1.0, 100.0, ContinuousQVSpec{-0.1, BrownianGen{}}}, 6, 1),
      std::invalid_argument);
  CHECK_THROWS_AS(
      generate_trajectory(
          ClassSpec{1.0, 100.0,
                    GeometricPoissonSpec{0.05, -1.5, PoissonSource{1.0}}},
          6, 1),
      std::invalid_argument);
  CHECK_THROWS_AS(
      generate_trajectory(
          ClassSpec{1.0, 100.0,
                    JumpDiffusionSpec{0.05, 0.2, UniformSize{-1.2, -0.5},
                                      PoissonSource{1.0}}},
          6, 1),
      std::invalid_argument);
}

TEST_CASE("renewal sources produce interior increasing jump times") {
  const ClassSpec uniform_arrivals{
      3.0, 10.0,
      GeometricPoissonSpec{-0.05, 0.2,
                           RenewalSource{UniformArrival{0.2, 0.6}}}};
  const Trajectory x = generate_trajectory(uniform_arrivals, 8, 11);
  double prev = 0.0;
  for (const Jump& j : x.jumps()) {
    CHECK(j.time > prev);
    CHECK(j.time < 3.0);
    CHECK(j.factor == doctest::Approx(1.2));
    prev = j.time;
  }
  CHECK(x.jumps().size() >= 4);  // inter-arrivals at most 0.6 on [0,3]

  const ClassSpec rational{1.0, 10.0,
                           GeometricPoissonSpec{-0.05, 0.2,
                                                RenewalSource{RationalArrival{8, 4}}}};
  const Trajectory r = generate_trajectory(rational, 8, 13);
  for (const Jump& j : r.jumps()) {
    // times are sums of eighths
    CHECK(std::abs(j.time * 8.0 - std::round(j.time * 8.0)) < 1e-12);
  }
}

TEST_CASE("bundle generation is thread-count independent") {
  const ClassSpec spec{1.0, 100.0, ContinuousQVSpec{0.2, BrownianGen{}}};
  const PartitionSequence p(1.0, PartitionRule::dyadic, 8);
  const auto serial = generate_bundle(spec, p, 99, 6, 1);
  const auto parallel = generate_bundle(spec, p, 99, 6, 4);
  REQUIRE(serial.size() == parallel.size());
  for (std::size_t i = 0; i < serial.size(); ++i) {
    CHECK(serial[i].log_cont().back() == parallel[i].log_cont().back());
  }
}
