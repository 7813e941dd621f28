#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "wxaug/manifest.hpp"

namespace wxaug {

enum class Verdict { kKept, kRejectedHallucination, kRejectedUnrealistic };

std::string_view to_string(Verdict v);
std::optional<Verdict> parse_verdict(std::string_view s);
ReviewState review_state_for(Verdict v);

using Timestamp = std::chrono::sys_time<std::chrono::milliseconds>;

/// "2026-10-16T08:12:00.123Z"
std::string format_timestamp(Timestamp t);
std::optional<Timestamp> parse_timestamp(std::string_view s);
Timestamp now_utc();

struct ReviewDecision {
  std::string image_id;
  Verdict verdict = Verdict::kKept;
  std::string reviewer;
  Timestamp timestamp{};

  bool operator==(const ReviewDecision&) const = default;
};

/// One JSON object per line, no trailing newline.
std::string decision_to_line(const ReviewDecision& d);
ReviewDecision decision_from_line(std::string_view line);

class ReviewError : public std::runtime_error {
 public:
  enum class Kind { kUnknownId, kNotAugmented, kPendingRemain, kBadLog };
  ReviewError(Kind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct ConditionProgress {
  std::size_t pending = 0;
  std::size_t kept = 0;
  std::size_t rejected_hallucination = 0;
  std::size_t rejected_unrealistic = 0;

  std::size_t total() const { return pending + kept + rejected_hallucination + rejected_unrealistic; }
  bool operator==(const ConditionProgress&) const = default;
};

using Progress = std::map<WeatherCondition, ConditionProgress>;

struct ReviewPair {
  ImageRecord original;
  ImageRecord augmented;
};

/// Effective review state is a fold over an append-only decision log: the latest
/// decision for an image wins; images without decisions keep the manifest's state.
class ReviewSession {
 public:
  explicit ReviewSession(DatasetManifest manifest, std::vector<ReviewDecision> log = {});

  /// Replays the log file (created if missing) and appends future decisions to it.
  /// A torn final line left by a crash is discarded.
  static ReviewSession open(DatasetManifest manifest, const std::filesystem::path& log_path);

  /// First pending pair in (condition, source_id, id) order matching the filter.
  std::optional<ReviewPair> next_pending(std::optional<WeatherCondition> filter = std::nullopt) const;
  std::optional<ReviewPair> pair(std::string_view augmented_id) const;

  /// Persists then applies the decision. Returns false (nothing written) when the
  /// decision repeats the current effective verdict and reviewer.
  bool record_decision(const ReviewDecision& decision);

  ReviewState state_of(std::string_view id) const;
  Progress progress() const;
  /// The manifest with every augmented record's review_state set to its effective state.
  DatasetManifest effective_manifest() const;

  const DatasetManifest& manifest() const { return manifest_; }
  const std::vector<ReviewDecision>& log() const { return log_; }

 private:
  const ImageRecord& checked_augmented(std::string_view id) const;
  void apply(const ReviewDecision& decision);

  DatasetManifest manifest_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::size_t> queue_;  // augmented record indices in review order
  std::vector<ReviewDecision> log_;
  std::unordered_map<std::string, std::size_t> latest_;  // id -> position in log_
  std::optional<std::filesystem::path> log_path_;
};

struct FinalizeCounts {
  std::size_t kept = 0;
  std::size_t rejected_hallucination = 0;
  std::size_t rejected_unrealistic = 0;
  std::size_t dropped_pending = 0;

  bool operator==(const FinalizeCounts&) const = default;
};

struct FinalizeResult {
  DatasetManifest manifest;
  std::map<WeatherCondition, FinalizeCounts> counts;
};

/// Keeps every non-augmented record plus the augmented records marked kept.
/// Pending records are an error unless `allow_pending`, in which case they are dropped.
/// Decisions in a log file without touching it; an unterminated tail is used only
/// when it parses. Missing file yields an empty log.
std::vector<ReviewDecision> read_log(const std::filesystem::path& log_path);

FinalizeResult finalize_filtered(const DatasetManifest& manifest, bool allow_pending = false);

}  // namespace wxaug
