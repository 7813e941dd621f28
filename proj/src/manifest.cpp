#include "wxaug/manifest.hpp"

#include <algorithm>
#include <set>
#include <unordered_map>

#include <json.hpp>

#include "wxaug/io.hpp"
#include "wxaug/json_codec.hpp"

namespace wxaug {

using nlohmann::json;

Split DatasetManifest::split_of(const std::string& id) const {
  auto it = splits.find(id);
  return it == splits.end() ? Split::kUnassigned : it->second;
}

const ImageRecord* DatasetManifest::find(std::string_view id) const {
  for (const auto& r : records) {
    if (r.id == id) return &r;
  }
  return nullptr;
}

void DatasetManifest::canonicalize() {
  std::stable_sort(records.begin(), records.end(),
                   [](const ImageRecord& a, const ImageRecord& b) { return a.id < b.id; });
  std::erase_if(splits, [](const auto& kv) { return kv.second == Split::kUnassigned; });
}

bool structurally_equal(const DatasetManifest& a, const DatasetManifest& b) {
  DatasetManifest ca = a;
  DatasetManifest cb = b;
  ca.canonicalize();
  cb.canonicalize();
  return ca == cb;
}

std::string describe(const Violation& v) {
  std::string out;
  if (!v.record_id.empty()) out += "record '" + v.record_id + "' ";
  if (!v.field.empty()) out += "field '" + v.field + "': ";
  out += v.message;
  return out;
}

ManifestError::ManifestError(Kind kind, std::string record_id, std::string field,
                             const std::string& message)
    : std::runtime_error(describe(Violation{record_id, field, message})),
      kind_(kind),
      record_id_(std::move(record_id)),
      field_(std::move(field)) {}

std::vector<Violation> validate_manifest(const DatasetManifest& manifest) {
  std::vector<Violation> out;
  std::unordered_map<std::string, const ImageRecord*> by_id;
  for (const auto& r : manifest.records) {
    if (r.id.empty()) {
      out.push_back({"", "id", "empty record id"});
      continue;
    }
    if (!by_id.emplace(r.id, &r).second) {
      out.push_back({r.id, "id", "duplicate id"});
    }
  }

  for (const auto& r : manifest.records) {
    if (r.image_path.empty()) {
      out.push_back({r.id, "image", "empty image path"});
    } else if (std::filesystem::path(r.image_path).is_absolute()) {
      out.push_back({r.id, "image", "image path must be relative"});
    }
    if (!condition_allowed(manifest.framework, r.condition)) {
      out.push_back({r.id, "condition",
                     std::string(to_string(r.condition)) + " is not valid in the " +
                         std::string(to_string(manifest.framework)) + " framework"});
    }
    for (std::size_t i = 0; i < r.annotations.size(); ++i) {
      if (!r.annotations[i].bbox.valid()) {
        out.push_back({r.id, "annotations[" + std::to_string(i) + "].bbox",
                       "box must be finite, non-negative, with positive area"});
      }
    }

    if (r.is_augmented()) {
      if (!r.source_id) {
        out.push_back({r.id, "source_id", "augmented record without source_id"});
      }
      if (r.review_state == ReviewState::kNotApplicable) {
        out.push_back({r.id, "review_state", "augmented record must carry a review state"});
      }
      if (r.condition == WeatherCondition::kDefault) {
        out.push_back({r.id, "condition", "augmented record cannot have condition default"});
      }
    } else {
      if (r.source_id) {
        out.push_back({r.id, "source_id", "only augmented records have a source_id"});
      }
      if (r.review_state != ReviewState::kNotApplicable) {
        out.push_back({r.id, "review_state", "only augmented records are reviewed"});
      }
    }

    if (r.source_id) {
      auto it = by_id.find(*r.source_id);
      if (it == by_id.end()) {
        out.push_back({r.id, "source_id", "dangling source_id '" + *r.source_id + "'"});
      } else if (r.is_augmented() && it->second->annotations != r.annotations) {
        out.push_back({r.id, "annotations", "differ from source '" + *r.source_id + "'"});
      }
    }
  }

  for (const auto& [id, split] : manifest.splits) {
    if (!by_id.contains(id)) {
      out.push_back({id, "splits", "split assigned to unknown record"});
    }
  }
  return out;
}

DatasetManifest parse_manifest(std::string_view document) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error& e) {
    throw ManifestError(ManifestError::Kind::kSyntax, "", "", e.what());
  }

  DatasetManifest m;
  std::string current_id;
  try {
    if (!doc.is_object()) throw codec::FieldError("", "top level must be an object");
    m.framework = codec::enum_field(doc, "framework", parse_framework);
    const json& records = codec::require(doc, "records");
    if (!records.is_array()) throw codec::FieldError("records", "must be an array");
    m.records.reserve(records.size());
    for (const auto& jr : records) {
      current_id.clear();
      if (jr.is_object() && jr.contains("id") && jr["id"].is_string()) {
        current_id = jr["id"].get<std::string>();
      }
      m.records.push_back(codec::record_from_json(jr));
    }
    current_id.clear();
    if (doc.contains("splits")) {
      const json& splits = doc["splits"];
      if (!splits.is_object()) throw codec::FieldError("splits", "must be an object");
      for (const auto& [id, value] : splits.items()) {
        current_id = id;
        if (!value.is_string()) throw codec::FieldError("splits", "split must be a string");
        auto s = parse_split(value.get<std::string>());
        if (!s) throw codec::FieldError("splits", "unknown split '" + value.get<std::string>() + "'");
        if (*s != Split::kUnassigned) m.splits[id] = *s;
      }
    }
  } catch (const codec::FieldError& e) {
    throw ManifestError(ManifestError::Kind::kSyntax, current_id, e.field(), e.what());
  }

  auto violations = validate_manifest(m);
  if (!violations.empty()) {
    const auto& v = violations.front();
    std::string message = v.message;
    if (violations.size() > 1) {
      message += " (and " + std::to_string(violations.size() - 1) + " more)";
    }
    throw ManifestError(ManifestError::Kind::kSemantic, v.record_id, v.field, message);
  }
  return m;
}

std::string serialize_manifest(const DatasetManifest& manifest) {
  DatasetManifest sorted = manifest;
  sorted.canonicalize();

  json doc = json::object();
  doc["framework"] = to_string(sorted.framework);
  json records = json::array();
  for (const auto& r : sorted.records) records.push_back(codec::record_to_json(r));
  doc["records"] = std::move(records);
  json splits = json::object();
  for (const auto& [id, split] : sorted.splits) splits[id] = to_string(split);
  doc["splits"] = std::move(splits);
  return doc.dump(2) + "\n";
}

DatasetManifest load_manifest(const std::string& path) {
  return parse_manifest(read_text_file(path));
}

void save_manifest(const DatasetManifest& manifest, const std::string& path) {
  write_file(path, serialize_manifest(manifest));
}

std::vector<PredictionLine> parse_predictions(std::string_view jsonl) {
  std::vector<PredictionLine> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= jsonl.size()) {
    std::size_t end = jsonl.find('\n', pos);
    if (end == std::string_view::npos) end = jsonl.size();
    std::string_view line = jsonl.substr(pos, end - pos);
    ++line_no;
    pos = end + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      json j = json::parse(line);
      PredictionLine p;
      p.image_id = codec::string_field(j, "image_id");
      p.prediction.cls = codec::enum_field(j, "class", parse_class);
      p.prediction.bbox = codec::bbox_from_json(codec::require(j, "bbox"));
      p.prediction.confidence = codec::number_field(j, "confidence");
      if (!(p.prediction.confidence >= 0.0 && p.prediction.confidence <= 1.0)) {
        throw codec::FieldError("confidence", "must lie in [0, 1]");
      }
      if (!p.prediction.bbox.valid()) throw codec::FieldError("bbox", "invalid box");
      out.push_back(std::move(p));
    } catch (const json::exception& e) {
      throw std::runtime_error("predictions line " + std::to_string(line_no) + ": " + e.what());
    } catch (const codec::FieldError& e) {
      throw std::runtime_error("predictions line " + std::to_string(line_no) + ": field '" +
                               e.field() + "': " + e.what());
    }
  }
  return out;
}

std::string serialize_predictions(const std::vector<PredictionLine>& lines) {
  std::string out;
  for (const auto& p : lines) {
    json j = json::object();
    j["image_id"] = p.image_id;
    j["class"] = to_string(p.prediction.cls);
    j["bbox"] = codec::bbox_to_json(p.prediction.bbox);
    j["confidence"] = p.prediction.confidence;
    out += j.dump();
    out += '\n';
  }
  return out;
}

}  // namespace wxaug
