#include "wxaug/json_codec.hpp"

namespace wxaug::codec {

using nlohmann::json;

const json& require(const json& j, const char* key) {
  if (!j.is_object()) throw FieldError(key, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw FieldError(key, "missing field");
  return *it;
}

std::string string_field(const json& j, const char* key) {
  const json& v = require(j, key);
  if (!v.is_string()) throw FieldError(key, "expected a string");
  return v.get<std::string>();
}

double number_field(const json& j, const char* key) {
  const json& v = require(j, key);
  if (!v.is_number()) throw FieldError(key, "expected a number");
  return v.get<double>();
}

std::optional<std::string> optional_string_field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw FieldError(key, "expected a string");
  return it->get<std::string>();
}

BBox bbox_from_json(const json& j) {
  if (!j.is_array() || j.size() != 4) throw FieldError("bbox", "expected [x_min, y_min, x_max, y_max]");
  for (const auto& v : j) {
    if (!v.is_number()) throw FieldError("bbox", "coordinates must be numbers");
  }
  return BBox{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

json bbox_to_json(const BBox& b) { return json::array({b.x_min, b.y_min, b.x_max, b.y_max}); }

Annotation annotation_from_json(const json& j) {
  Annotation a;
  a.cls = enum_field(j, "class", parse_class);
  a.bbox = bbox_from_json(require(j, "bbox"));
  return a;
}

json annotation_to_json(const Annotation& a) {
  json j = json::object();
  j["class"] = to_string(a.cls);
  j["bbox"] = bbox_to_json(a.bbox);
  return j;
}

ImageRecord record_from_json(const json& j) {
  ImageRecord r;
  r.id = string_field(j, "id");
  r.image_path = string_field(j, "image");
  r.condition = enum_field(j, "condition", parse_condition);
  r.provenance = enum_field(j, "provenance", parse_provenance);
  r.source_id = optional_string_field(j, "source_id");
  r.recipe_id = optional_string_field(j, "recipe_id");
  r.review_state = enum_field(j, "review_state", parse_review_state);
  const json& anns = require(j, "annotations");
  if (!anns.is_array()) throw FieldError("annotations", "expected an array");
  r.annotations.reserve(anns.size());
  for (const auto& a : anns) r.annotations.push_back(annotation_from_json(a));
  return r;
}

json record_to_json(const ImageRecord& r) {
  json j = json::object();
  j["id"] = r.id;
  j["image"] = r.image_path;
  j["condition"] = to_string(r.condition);
  j["provenance"] = to_string(r.provenance);
  if (r.source_id) j["source_id"] = *r.source_id;
  if (r.recipe_id) j["recipe_id"] = *r.recipe_id;
  j["review_state"] = to_string(r.review_state);
  json anns = json::array();
  for (const auto& a : r.annotations) anns.push_back(annotation_to_json(a));
  j["annotations"] = std::move(anns);
  return j;
}

}  // namespace wxaug::codec
