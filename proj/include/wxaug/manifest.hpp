#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "wxaug/types.hpp"

namespace wxaug {

inline constexpr std::string_view kManifestSchemaVersion = "1";

struct DatasetManifest {
  Framework framework = Framework::kSimulated;
  std::vector<ImageRecord> records;
  // Records absent from the map are unassigned.
  std::map<std::string, Split> splits;

  Split split_of(const std::string& id) const;
  const ImageRecord* find(std::string_view id) const;

  /// Sorts records by id. Record order carries no meaning.
  void canonicalize();

  bool operator==(const DatasetManifest&) const = default;
};

/// Equality ignoring record order.
bool structurally_equal(const DatasetManifest& a, const DatasetManifest& b);

struct Violation {
  std::string record_id;  // empty for manifest-level problems
  std::string field;
  std::string message;
};

std::string describe(const Violation& v);

class ManifestError : public std::runtime_error {
 public:
  enum class Kind { kSyntax, kSemantic };

  ManifestError(Kind kind, std::string record_id, std::string field,
                const std::string& message);

  Kind kind() const { return kind_; }
  const std::string& record_id() const { return record_id_; }
  const std::string& field() const { return field_; }

 private:
  Kind kind_;
  std::string record_id_;
  std::string field_;
};

/// Every violated type invariant, one entry per (record, invariant).
std::vector<Violation> validate_manifest(const DatasetManifest& manifest);

/// Throws ManifestError on malformed JSON or on the first invariant violation.
DatasetManifest parse_manifest(std::string_view document);

/// Deterministic: records sorted by id, two-space indented JSON, trailing newline.
std::string serialize_manifest(const DatasetManifest& manifest);

DatasetManifest load_manifest(const std::string& path);
void save_manifest(const DatasetManifest& manifest, const std::string& path);

// Prediction JSON Lines.
struct PredictionLine {
  std::string image_id;
  Prediction prediction;
};

/// Blank lines are skipped. Errors carry the 1-based line number.
std::vector<PredictionLine> parse_predictions(std::string_view jsonl);
std::string serialize_predictions(const std::vector<PredictionLine>& lines);

}  // namespace wxaug
