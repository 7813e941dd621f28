#include "wxaug/types.hpp"

#include <cmath>

namespace wxaug {

namespace {

template <typename Enum, std::size_t N>
std::optional<Enum> lookup(std::string_view s,
                           const std::array<std::pair<Enum, std::string_view>, N>& table) {
  for (const auto& [value, name] : table) {
    if (name == s) return value;
  }
  return std::nullopt;
}

template <typename Enum, std::size_t N>
std::string_view name_of(Enum e, const std::array<std::pair<Enum, std::string_view>, N>& table) {
  for (const auto& [value, name] : table) {
    if (value == e) return name;
  }
  return "?";
}

constexpr std::array<std::pair<WeatherCondition, std::string_view>, 5> kConditionNames = {{
    {WeatherCondition::kDefault, "default"},
    {WeatherCondition::kRain, "rain"},
    {WeatherCondition::kFog, "fog"},
    {WeatherCondition::kNight, "night"},
    {WeatherCondition::kSnow, "snow"},
}};

constexpr std::array<std::pair<ObjectClass, std::string_view>, 4> kClassNames = {{
    {ObjectClass::kWalker, "walker"},
    {ObjectClass::kVehicle, "vehicle"},
    {ObjectClass::kTrafficSign, "traffic_sign"},
    {ObjectClass::kTrafficLight, "traffic_light"},
}};

constexpr std::array<std::pair<Framework, std::string_view>, 2> kFrameworkNames = {{
    {Framework::kSimulated, "simulated"},
    {Framework::kRealWorld, "real_world"},
}};

constexpr std::array<std::pair<Provenance, std::string_view>, 3> kProvenanceNames = {{
    {Provenance::kCaptured, "captured"},
    {Provenance::kRendered, "rendered"},
    {Provenance::kAugmented, "augmented"},
}};

constexpr std::array<std::pair<ReviewState, std::string_view>, 5> kReviewNames = {{
    {ReviewState::kNotApplicable, "not_applicable"},
    {ReviewState::kPending, "pending"},
    {ReviewState::kKept, "kept"},
    {ReviewState::kRejectedHallucination, "rejected_hallucination"},
    {ReviewState::kRejectedUnrealistic, "rejected_unrealistic"},
}};

constexpr std::array<std::pair<Split, std::string_view>, 4> kSplitNames = {{
    {Split::kTrain, "train"},
    {Split::kVal, "val"},
    {Split::kTest, "test"},
    {Split::kUnassigned, "unassigned"},
}};

}  // namespace

std::string_view to_string(WeatherCondition c) { return name_of(c, kConditionNames); }
std::string_view to_string(ObjectClass c) { return name_of(c, kClassNames); }
std::string_view to_string(Framework f) { return name_of(f, kFrameworkNames); }
std::string_view to_string(Provenance p) { return name_of(p, kProvenanceNames); }
std::string_view to_string(ReviewState s) { return name_of(s, kReviewNames); }
std::string_view to_string(Split s) { return name_of(s, kSplitNames); }

std::optional<WeatherCondition> parse_condition(std::string_view s) {
  return lookup(s, kConditionNames);
}
std::optional<ObjectClass> parse_class(std::string_view s) { return lookup(s, kClassNames); }
std::optional<Framework> parse_framework(std::string_view s) {
  return lookup(s, kFrameworkNames);
}
std::optional<Provenance> parse_provenance(std::string_view s) {
  return lookup(s, kProvenanceNames);
}
std::optional<ReviewState> parse_review_state(std::string_view s) {
  return lookup(s, kReviewNames);
}
std::optional<Split> parse_split(std::string_view s) { return lookup(s, kSplitNames); }

bool condition_allowed(Framework f, WeatherCondition c) {
  return !(f == Framework::kSimulated && c == WeatherCondition::kSnow);
}

bool BBox::valid() const {
  for (double v : {x_min, y_min, x_max, y_max}) {
    if (!std::isfinite(v) || v < 0) return false;
  }
  return x_min < x_max && y_min < y_max;
}

}  // namespace wxaug
