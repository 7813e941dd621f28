#include "wxaug/bdd100k.hpp"

#include <algorithm>
#include <array>
#include <filesystem>

#include <json.hpp>

#include "wxaug/json_codec.hpp"

namespace wxaug {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, 7> kKnownWeather = {
    "clear", "partly cloudy", "overcast", "rainy", "snowy", "foggy", "undefined"};

bool known_weather(std::string_view w) {
  return std::find(kKnownWeather.begin(), kKnownWeather.end(), w) != kKnownWeather.end();
}

std::string attribute(const json& attrs, const char* key) {
  if (!attrs.is_object()) throw codec::FieldError("attributes", "expected an object");
  return codec::string_field(attrs, key);
}

}  // namespace

std::optional<ObjectClass> map_bdd_category(std::string_view category) {
  if (category == "person") return ObjectClass::kWalker;
  if (category == "car" || category == "bus" || category == "truck" ||
      category == "motorcycle" || category == "bicycle" || category == "train") {
    return ObjectClass::kVehicle;
  }
  if (category == "traffic sign") return ObjectClass::kTrafficSign;
  if (category == "traffic light") return ObjectClass::kTrafficLight;
  return std::nullopt;
}

BddImportResult import_bdd100k(std::string_view labels, const std::string& image_root,
                               const BddFilter& filter) {
  json doc;
  try {
    doc = json::parse(labels);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(std::string("BDD100K labels: ") + e.what());
  }
  if (!doc.is_array()) throw std::runtime_error("BDD100K labels: expected a list of entries");

  BddImportResult result;
  result.manifest.framework = Framework::kRealWorld;
  result.entries = doc.size();

  for (std::size_t index = 0; index < doc.size(); ++index) {
    const json& entry = doc[index];
    try {
      std::string name = codec::string_field(entry, "name");
      const json& attrs = codec::require(entry, "attributes");
      std::string weather = attribute(attrs, "weather");
      std::string timeofday = attribute(attrs, "timeofday");

      if (!known_weather(weather)) {
        ++result.unknown_weather_skipped;
        continue;
      }
      if (!filter.weather.contains(weather) || !filter.timeofday.contains(timeofday)) {
        ++result.excluded;
        continue;
      }

      ImageRecord record;
      record.id = std::filesystem::path(name).stem().string();
      record.image_path = (std::filesystem::path(image_root) / name).generic_string();
      record.condition = WeatherCondition::kDefault;
      record.provenance = Provenance::kCaptured;

      if (auto it = entry.find("labels"); it != entry.end() && !it->is_null()) {
        if (!it->is_array()) throw codec::FieldError("labels", "expected a list");
        for (const auto& label : *it) {
          auto box_it = label.find("box2d");
          if (box_it == label.end()) continue;  // polygons, lanes, drivable area
          auto cls = map_bdd_category(codec::string_field(label, "category"));
          if (!cls) {
            ++result.unmapped_labels;
            continue;
          }
          const json& b = *box_it;
          BBox box{std::max(0.0, codec::number_field(b, "x1")),
                   std::max(0.0, codec::number_field(b, "y1")), codec::number_field(b, "x2"),
                   codec::number_field(b, "y2")};
          if (!box.valid()) {
            ++result.degenerate_boxes;
            continue;
          }
          record.annotations.push_back({box, *cls});
        }
      }
      result.manifest.records.push_back(std::move(record));
    } catch (const codec::FieldError& e) {
      throw std::runtime_error("BDD100K entry " + std::to_string(index) + ": field '" +
                               e.field() + "': " + e.what());
    } catch (const json::exception& e) {
      throw std::runtime_error("BDD100K entry " + std::to_string(index) + ": " + e.what());
    }
  }

  auto violations = validate_manifest(result.manifest);
  if (!violations.empty()) {
    throw std::runtime_error("BDD100K import: " + describe(violations.front()));
  }
  result.manifest.canonicalize();
  return result;
}

}  // namespace wxaug
