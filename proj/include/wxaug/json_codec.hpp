#pragma once

// JSON field helpers shared by the file-format readers and writers.

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include <json.hpp>

#include "wxaug/types.hpp"

namespace wxaug::codec {

class FieldError : public std::runtime_error {
 public:
  FieldError(std::string field, const std::string& message)
      : std::runtime_error(message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

const nlohmann::json& require(const nlohmann::json& j, const char* key);
std::string string_field(const nlohmann::json& j, const char* key);
double number_field(const nlohmann::json& j, const char* key);
std::optional<std::string> optional_string_field(const nlohmann::json& j, const char* key);

template <typename Parser>
auto enum_field(const nlohmann::json& j, const char* key, Parser parse) {
  std::string s = string_field(j, key);
  auto v = parse(s);
  if (!v) throw FieldError(key, "unknown value '" + s + "'");
  return *v;
}

BBox bbox_from_json(const nlohmann::json& j);
nlohmann::json bbox_to_json(const BBox& b);

Annotation annotation_from_json(const nlohmann::json& j);
nlohmann::json annotation_to_json(const Annotation& a);

ImageRecord record_from_json(const nlohmann::json& j);
nlohmann::json record_to_json(const ImageRecord& r);

}  // namespace wxaug::codec
