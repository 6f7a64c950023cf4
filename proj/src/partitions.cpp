#include "pathwise/partitions.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace pathwise {

namespace {
constexpr int kMaxSupportedLevel = 30;
}

PartitionSequence::PartitionSequence(double horizon, PartitionRule rule,
                                     int max_level, int uniform_base)
    : horizon_(horizon),
      rule_(rule),
      base_(rule == PartitionRule::dyadic ? 2 : uniform_base),
      max_level_(max_level) {
  if (!(horizon > 0.0)) {
    throw std::invalid_argument("partition horizon must be positive");
  }
  if (max_level < 1 || max_level > kMaxSupportedLevel) {
    throw std::invalid_argument("partition max_level out of range [1, " +
                                std::to_string(kMaxSupportedLevel) + "]");
  }
  if (rule_ == PartitionRule::uniform && base_ < 2) {
    throw std::invalid_argument("uniform partition base must be >= 2");
  }
}

void PartitionSequence::require_level(int level) const {
  if (level < 0 || level > max_level_) {
    throw std::invalid_argument("partition level " + std::to_string(level) +
                                " outside [0, " + std::to_string(max_level_) +
                                "]");
  }
}

std::size_t PartitionSequence::cell_count(int level) const {
  require_level(level);
  std::size_t n = 1;
  for (int i = 0; i < level; ++i) n *= static_cast<std::size_t>(base_);
  return n;
}

double PartitionSequence::mesh(int level) const {
  require_level(level);
  if (base_ == 2) return std::ldexp(horizon_, -level);  // exact
  return horizon_ / static_cast<double>(cell_count(level));
}

double PartitionSequence::node(int level, std::size_t k) const {
  const std::size_t cells = cell_count(level);
  if (k > cells) throw std::invalid_argument("partition node index out of range");
  if (k == cells) return horizon_;  // right endpoint is T exactly
  return horizon_ * (static_cast<double>(k) / static_cast<double>(cells));
}

std::vector<double> PartitionSequence::grid(int level) const {
  const std::size_t cells = cell_count(level);
  std::vector<double> g(cells + 1);
  for (std::size_t k = 0; k <= cells; ++k) g[k] = node(level, k);
  return g;
}

PartitionSequence make_partition_sequence(double horizon, PartitionRule rule,
                                          int max_level, int uniform_base) {
  return PartitionSequence(horizon, rule, max_level, uniform_base);
}

}  // namespace pathwise
