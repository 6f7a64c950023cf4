#pragma once

#include <cstddef>
#include <vector>

namespace pathwise {

// Refining partition sequences of [0, T]. Level n of a dyadic sequence has
// 2^n equal cells; a uniform(m) sequence has m^n. Both families are nested:
// every level-n node is a level-(n+1) node. Grids are generated on demand,
// the object itself only stores (T, rule, max_level).
enum class PartitionRule { dyadic, uniform };

class PartitionSequence {
 public:
  // Dyadic constructor. For uniform(m) pass PartitionRule::uniform and m >= 2.
  PartitionSequence(double horizon, PartitionRule rule, int max_level,
                    int uniform_base = 2);

  double horizon() const { return horizon_; }
  PartitionRule rule() const { return rule_; }
  int max_level() const { return max_level_; }
  int base() const { return base_; }

  // Number of cells at a level: base^level.
  std::size_t cell_count(int level) const;

  // Largest cell width at a level. For dyadic grids mesh(n) * 2^n == T
  // exactly in floating point.
  double mesh(int level) const;

  // k-th node of the level-n grid, 0 <= k <= cell_count(n).
  double node(int level, std::size_t k) const;

  std::vector<double> grid(int level) const;

 private:
  void require_level(int level) const;

  double horizon_;
  PartitionRule rule_;
  int base_;
  int max_level_;
};

PartitionSequence make_partition_sequence(double horizon, PartitionRule rule,
                                          int max_level, int uniform_base = 2);

}  // namespace pathwise
