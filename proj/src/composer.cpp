#include "wxaug/composer.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <unordered_map>

#include <json.hpp>

#include "wxaug/seed.hpp"

namespace wxaug {

namespace {

constexpr double kSumTolerance = 1e-9;
// Absorbs representation error in fraction * n (e.g. 0.29 * 100 = 28.999999999999996).
constexpr double kFloorSlack = 1e-9;

std::size_t floor_share(double fraction, std::size_t n) {
  return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + kFloorSlack));
}

// Seeded draw of k ids without replacement; independent of the input order.
std::vector<std::string> sample_ids(std::vector<std::string> ids, std::size_t k, std::uint64_t seed) {
  std::sort(ids.begin(), ids.end());
  std::mt19937_64 rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);
  ids.resize(std::min(k, ids.size()));
  return ids;
}

bool eligible_augmented(const ImageRecord& r) {
  return r.is_augmented() && r.review_state == ReviewState::kKept;
}

}  // namespace

std::vector<std::string> spec_problems(const CompositionSpec& spec) {
  std::vector<std::string> out;
  if (!spec.fractions.contains(WeatherCondition::kDefault)) {
    out.emplace_back("fractions must include the default condition");
  }
  double sum = 0;
  for (const auto& [c, f] : spec.fractions) {
    if (!(f >= 0.0 && f <= 1.0)) {
      out.emplace_back("fraction for " + std::string(to_string(c)) + " must lie in [0, 1]");
    }
    sum += f;
  }
  if (std::abs(sum - 1.0) > kSumTolerance) {
    out.emplace_back("fractions sum to " + std::to_string(sum) + ", expected 1");
  }
  if (!(spec.train_fraction >= 0.0 && spec.train_fraction <= 1.0) ||
      !(spec.val_fraction >= 0.0 && spec.val_fraction <= 1.0) ||
      std::abs(spec.train_fraction + spec.val_fraction - 1.0) > kSumTolerance) {
    out.emplace_back("train and val fractions must lie in [0, 1] and sum to 1");
  }
  return out;
}

ConditionCounts plan_counts(std::size_t n_split, const ConditionFractions& fractions) {
  ConditionCounts counts;
  std::size_t adverse = 0;
  for (const auto& [c, f] : fractions) {
    if (c == WeatherCondition::kDefault) continue;
    const std::size_t k = std::min(floor_share(f, n_split), n_split - adverse);
    counts[c] = k;
    adverse += k;
  }
  counts[WeatherCondition::kDefault] = n_split - adverse;
  return counts;
}

ConditionFractions parse_fractions(std::string_view json_text) {
  auto doc = nlohmann::json::parse(json_text);
  if (!doc.is_object()) throw std::runtime_error("fractions: expected an object");
  ConditionFractions out;
  for (const auto& [key, value] : doc.items()) {
    auto c = parse_condition(key);
    if (!c) throw std::runtime_error("fractions: unknown condition '" + key + "'");
    if (!value.is_number()) throw std::runtime_error("fractions: value for '" + key + "' must be a number");
    out[*c] = value.get<double>();
  }
  return out;
}

DatasetManifest compose(const DatasetManifest& manifest, const CompositionSpec& spec,
                        ComposeMode mode) {
  if (auto problems = spec_problems(spec); !problems.empty()) throw ComposeError(problems.front());
  for (const auto& [c, f] : spec.fractions) {
    if (f > 0 && !condition_allowed(manifest.framework, c)) {
      throw ComposeError(std::string(to_string(c)) + " is not available in the " +
                         std::string(to_string(manifest.framework)) + " framework");
    }
  }
  for (const auto& r : manifest.records) {
    if (r.is_augmented() && r.review_state == ReviewState::kPending) {
      throw ComposeError("manifest is not finalized: '" + r.id + "' is still pending review");
    }
  }

  DatasetManifest out = manifest;
  std::erase_if(out.splits, [](const auto& kv) {
    return kv.second == Split::kTrain || kv.second == Split::kVal;
  });

  std::vector<std::string> originals;
  for (const auto& r : manifest.records) {
    if (!r.is_augmented() && r.condition == WeatherCondition::kDefault &&
        manifest.split_of(r.id) != Split::kTest) {
      originals.push_back(r.id);
    }
  }
  const std::size_t n_pool = originals.size();
  const std::size_t n_train = spec.train_size.value_or(
      spec.val_size ? n_pool - std::min(*spec.val_size, n_pool) : floor_share(spec.train_fraction, n_pool));
  const std::size_t n_val = spec.val_size.value_or(n_pool - std::min(n_train, n_pool));
  if (n_train + n_val > n_pool) {
    throw ComposeError("need " + std::to_string(n_train + n_val) +
                       " default originals for the train/val split but only " +
                       std::to_string(n_pool) + " are available");
  }

  // Partition the originals; each split draws only from its own partition.
  auto shuffled = sample_ids(originals, n_pool, derive_seed(spec.seed, {"partition"}));
  std::unordered_map<std::string, Split> partition;
  for (std::size_t i = 0; i < n_train + n_val; ++i) {
    partition[shuffled[i]] = i < n_train ? Split::kTrain : Split::kVal;
  }

  if (mode == ComposeMode::kBasic) {
    for (const auto& [id, split] : partition) out.splits[id] = split;
    out.canonicalize();
    return out;
  }

  std::vector<std::string> shortfalls;
  for (Split split : {Split::kTrain, Split::kVal}) {
    const std::size_t n_split = split == Split::kTrain ? n_train : n_val;
    const std::string split_name(to_string(split));
    for (const auto& [condition, count] : plan_counts(n_split, spec.fractions)) {
      std::vector<std::string> pool;
      for (const auto& r : manifest.records) {
        if (r.condition != condition || manifest.split_of(r.id) == Split::kTest) continue;
        const std::string& anchor =
            r.is_augmented() ? *r.source_id : r.id;
        auto p = partition.find(anchor);
        if (p == partition.end() || p->second != split) continue;
        if (r.is_augmented() ? eligible_augmented(r) : condition == WeatherCondition::kDefault) {
          pool.push_back(r.id);
        }
      }
      if (pool.size() < count) {
        shortfalls.push_back(split_name + "/" + std::string(to_string(condition)) + ": need " +
                             std::to_string(count) + ", have " + std::to_string(pool.size()));
        continue;
      }
      const auto seed = derive_seed(spec.seed, {"draw", split_name, to_string(condition)});
      for (auto& id : sample_ids(std::move(pool), count, seed)) out.splits[id] = split;
    }
  }
  if (!shortfalls.empty()) {
    std::string message = "not enough records for the requested composition:";
    for (const auto& s : shortfalls) message += " [" + s + "]";
    throw ComposeError(message);
  }
  out.canonicalize();
  return out;
}

DatasetManifest build_test_set(const DatasetManifest& manifest, std::size_t per_condition_count,
                               const std::vector<WeatherCondition>& conditions, std::uint64_t seed) {
  std::set<WeatherCondition> seen;
  for (auto c : conditions) {
    if (!seen.insert(c).second) throw ComposeError("condition listed twice: " + std::string(to_string(c)));
    if (!condition_allowed(manifest.framework, c)) {
      throw ComposeError(std::string(to_string(c)) + " is not available in the " +
                         std::string(to_string(manifest.framework)) + " framework");
    }
  }

  DatasetManifest out = manifest;
  std::vector<std::string> shortfalls;
  for (auto c : conditions) {
    std::vector<std::string> pool;
    for (const auto& r : manifest.records) {
      if (r.condition != c || manifest.split_of(r.id) != Split::kUnassigned) continue;
      if (r.is_augmented() && !eligible_augmented(r)) continue;
      pool.push_back(r.id);
    }
    if (pool.size() < per_condition_count) {
      shortfalls.push_back(std::string(to_string(c)) + ": need " + std::to_string(per_condition_count) +
                           ", have " + std::to_string(pool.size()));
      continue;
    }
    for (auto& id : sample_ids(std::move(pool), per_condition_count,
                               derive_seed(seed, {"test", to_string(c)}))) {
      out.splits[id] = Split::kTest;
    }
  }
  if (!shortfalls.empty()) {
    std::string message = "not enough unassigned records for the test set:";
    for (const auto& s : shortfalls) message += " [" + s + "]";
    throw ComposeError(message);
  }
  out.canonicalize();
  return out;
}

}  // namespace wxaug
