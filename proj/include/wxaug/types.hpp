#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace wxaug {

enum class WeatherCondition { kDefault, kRain, kFog, kNight, kSnow };
enum class ObjectClass { kWalker, kVehicle, kTrafficSign, kTrafficLight };
enum class Framework { kSimulated, kRealWorld };
enum class Provenance { kCaptured, kRendered, kAugmented };
enum class ReviewState {
  kNotApplicable,
  kPending,
  kKept,
  kRejectedHallucination,
  kRejectedUnrealistic,
};
enum class Split { kTrain, kVal, kTest, kUnassigned };

inline constexpr std::array<WeatherCondition, 5> kAllConditions = {
    WeatherCondition::kDefault, WeatherCondition::kRain, WeatherCondition::kFog,
    WeatherCondition::kNight, WeatherCondition::kSnow};

inline constexpr std::array<ObjectClass, 4> kAllClasses = {
    ObjectClass::kWalker, ObjectClass::kVehicle, ObjectClass::kTrafficSign,
    ObjectClass::kTrafficLight};

inline constexpr std::size_t kNumClasses = kAllClasses.size();

constexpr std::size_t index_of(ObjectClass c) { return static_cast<std::size_t>(c); }

std::string_view to_string(WeatherCondition c);
std::string_view to_string(ObjectClass c);
std::string_view to_string(Framework f);
std::string_view to_string(Provenance p);
std::string_view to_string(ReviewState s);
std::string_view to_string(Split s);

std::optional<WeatherCondition> parse_condition(std::string_view s);
std::optional<ObjectClass> parse_class(std::string_view s);
std::optional<Framework> parse_framework(std::string_view s);
std::optional<Provenance> parse_provenance(std::string_view s);
std::optional<ReviewState> parse_review_state(std::string_view s);
std::optional<Split> parse_split(std::string_view s);

/// Snow cannot be rendered by the simulator, so it only exists in real-world data.
bool condition_allowed(Framework f, WeatherCondition c);

// Axis-aligned box in pixel coordinates, origin top-left, half-open extent.
struct BBox {
  double x_min = 0;
  double y_min = 0;
  double x_max = 0;
  double y_max = 0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return width() * height(); }
  /// Finite, non-negative, strictly positive area.
  bool valid() const;

  bool operator==(const BBox&) const = default;
};

struct Annotation {
  BBox bbox;
  ObjectClass cls = ObjectClass::kVehicle;

  bool operator==(const Annotation&) const = default;
};

struct Prediction {
  BBox bbox;
  ObjectClass cls = ObjectClass::kVehicle;
  double confidence = 0;

  bool operator==(const Prediction&) const = default;
};

struct ImageRecord {
  std::string id;
  std::string image_path;
  WeatherCondition condition = WeatherCondition::kDefault;
  Provenance provenance = Provenance::kCaptured;
  std::optional<std::string> source_id;
  std::optional<std::string> recipe_id;
  ReviewState review_state = ReviewState::kNotApplicable;
  std::vector<Annotation> annotations;

  bool is_augmented() const { return provenance == Provenance::kAugmented; }

  bool operator==(const ImageRecord&) const = default;
};

}  // namespace wxaug
