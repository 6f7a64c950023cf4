#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "pathwise/partitions.hpp"

using namespace pathwise;

TEST_CASE("dyadic level-3 grid of [0,1]") {
  const PartitionSequence p = make_partition_sequence(1.0, PartitionRule::dyadic, 3);
  CHECK(p.cell_count(3) == 8);
  const auto g = p.grid(3);
  REQUIRE(g.size() == 9);
  for (std::size_t k = 0; k < g.size(); ++k) {
    CHECK(g[k] == k / 8.0);  // dyadic rationals are exact doubles
  }
  CHECK(g.front() == 0.0);
  CHECK(g.back() == 1.0);
}

TEST_CASE("dyadic mesh is exactly T 2^-n") {
  const PartitionSequence p = make_partition_sequence(1.0, PartitionRule::dyadic, 12);
  CHECK(p.mesh(0) == 1.0);
  CHECK(p.mesh(10) == std::ldexp(1.0, -10));
  for (int n = 0; n <= 12; ++n) {
    CHECK(p.mesh(n) * std::ldexp(1.0, n) == 1.0);
  }
}

TEST_CASE("uniform base-3 grid of [0,2]") {
  const PartitionSequence p =
      make_partition_sequence(2.0, PartitionRule::uniform, 2, 3);
  CHECK(p.cell_count(2) == 9);
  CHECK(p.mesh(2) == doctest::Approx(2.0 / 9.0).epsilon(1e-15));
  const auto g = p.grid(2);
  REQUIRE(g.size() == 10);
  CHECK(g.back() == 2.0);
}

TEST_CASE("uniform base-2 mesh example") {
  const PartitionSequence p =
      make_partition_sequence(3.0, PartitionRule::uniform, 6, 2);
  CHECK(p.mesh(4) == doctest::Approx(3.0 / 16.0).epsilon(1e-15));
}

TEST_CASE("grids refine: level n nodes appear at level n+1") {
  const PartitionSequence dyadic = make_partition_sequence(1.7, PartitionRule::dyadic, 6);
  const PartitionSequence uniform =
      make_partition_sequence(2.5, PartitionRule::uniform, 4, 3);
  for (const auto& p : {dyadic, uniform}) {
    for (int n = 0; n < p.max_level(); ++n) {
      const std::size_t stride = static_cast<std::size_t>(p.base());
      for (std::size_t k = 0; k <= p.cell_count(n); ++k) {
        CHECK(p.node(n, k) == p.node(n + 1, k * stride));
      }
      CHECK(p.mesh(n + 1) < p.mesh(n));
    }
  }
}

TEST_CASE("invalid arguments rejected") {
  CHECK_THROWS_AS(make_partition_sequence(0.0, PartitionRule::dyadic, 3),
                  std::invalid_argument);
  CHECK_THROWS_AS(make_partition_sequence(-1.0, PartitionRule::dyadic, 3),
                  std::invalid_argument);
  CHECK_THROWS_AS(make_partition_sequence(1.0, PartitionRule::dyadic, 0),
                  std::invalid_argument);
  const PartitionSequence p = make_partition_sequence(1.0, PartitionRule::dyadic, 3);
  CHECK_THROWS_AS(p.mesh(-1), std::invalid_argument);
  CHECK_THROWS_AS(p.mesh(4), std::invalid_argument);
}
