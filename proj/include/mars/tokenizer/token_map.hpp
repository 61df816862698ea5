#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "mars/error.hpp"

namespace mars::tokenizer {

/// Ascending grid sides, e.g. {1, 2, 4, 8, 16}.
using Schedule = std::vector<int>;

void validate_schedule(const Schedule& s, int full_side);
int sequence_length(const Schedule& s);  // sum of k^2

/// Code indices per scale; scale s is a k_s x k_s row-major grid.
struct MultiScaleTokenMap {
  Schedule schedule;
  std::vector<std::vector<int>> grids;

  bool operator==(const MultiScaleTokenMap&) const = default;

  /// "MARSTOKS" | u32 scale count | u32 sides | per-scale u32 indices.
  std::vector<std::uint8_t> encode() const;
  static MultiScaleTokenMap decode(std::span<const std::uint8_t> bytes);
  void save(const std::filesystem::path& path) const;
  static MultiScaleTokenMap load(const std::filesystem::path& path);
};

/// Throws unless grids match the schedule and every index is in [0, vocab).
void validate(const MultiScaleTokenMap& t, int vocab);

}  // namespace mars::tokenizer
