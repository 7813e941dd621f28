#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "wxaug/manifest.hpp"

namespace wxaug {

using ConditionFractions = std::map<WeatherCondition, double>;
using ConditionCounts = std::map<WeatherCondition, std::size_t>;

struct CompositionSpec {
  ConditionFractions fractions;
  double train_fraction = 0.7;
  double val_fraction = 0.3;
  std::uint64_t seed = 0;
  // Override the split sizes derived from train_fraction over the default pool.
  std::optional<std::size_t> train_size;
  std::optional<std::size_t> val_size;
};

enum class ComposeMode { kBasic, kAugmented };

class ComposeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Problems with a CompositionSpec; empty when valid.
std::vector<std::string> spec_problems(const CompositionSpec& spec);

/// Adverse conditions get floor(fraction * n); default takes the remainder.
ConditionCounts plan_counts(std::size_t n_split, const ConditionFractions& fractions);

/// Parses {"default": 0.4, "fog": 0.2, ...}.
ConditionFractions parse_fractions(std::string_view json_text);

/// Assigns train/val. Basic mode uses only default-condition originals; augmented mode
/// fills each split per plan_counts from that split's originals and from kept augmented
/// records whose source sits in the same split. Existing test assignments are kept and
/// their records are never drawn.
DatasetManifest compose(const DatasetManifest& manifest, const CompositionSpec& spec,
                        ComposeMode mode);

/// Marks exactly `per_condition_count` records of each listed condition as test, drawn
/// from records that are unassigned (and kept, when augmented).
DatasetManifest build_test_set(const DatasetManifest& manifest, std::size_t per_condition_count,
                               const std::vector<WeatherCondition>& conditions, std::uint64_t seed);

}  // namespace wxaug
