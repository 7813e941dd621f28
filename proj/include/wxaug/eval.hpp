#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "wxaug/manifest.hpp"

namespace wxaug {

inline constexpr double kDefaultIouThreshold = 0.5;
inline constexpr std::size_t kDefaultBootstrapSamples = 1000;

class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

double iou(const BBox& a, const BBox& b);

struct ScoredDetection {
  double confidence = 0;
  bool true_positive = false;
  ObjectClass cls = ObjectClass::kVehicle;
};

// Matching outcome for one image.
struct MatchResult {
  // Grouped by class, descending confidence within a class (ties keep input order).
  std::vector<ScoredDetection> detections;
  std::array<std::size_t, kNumClasses> gt_counts{};
};

/// Greedy one-to-one matching: each prediction, in descending confidence, takes the
/// unmatched same-class ground truth of highest IoU if that IoU reaches the threshold.
MatchResult match_detections(std::span<const Prediction> predictions,
                             std::span<const Annotation> ground_truth, double iou_threshold);

struct RankedDetection {
  double confidence = 0;
  bool true_positive = false;
};

/// All-point interpolated AP over detections of one class pooled across images.
/// Stable-sorts by descending confidence. nullopt when gt_count is 0.
std::optional<double> average_precision(std::vector<RankedDetection> detections,
                                        std::size_t gt_count);

struct MapResult {
  double map50 = 0;
  std::array<std::optional<double>, kNumClasses> per_class;  // nullopt: class absent
};

/// Pools precomputed per-image matches in the given order. nullopt when no ground truth.
std::optional<MapResult> map_from_matches(std::span<const MatchResult* const> images);

struct ImageEval {
  std::vector<Prediction> predictions;
  std::vector<Annotation> ground_truth;
};

/// mAP over classes with at least one ground-truth instance. Throws EvalError when the
/// set holds no ground truth at all.
MapResult map50(std::span<const ImageEval> images, double iou_threshold = kDefaultIouThreshold);

struct MetricSummary {
  double mean = 0;
  double std = 0;           // population standard deviation
  std::size_t defined = 0;  // resamples in which the metric was defined

  bool operator==(const MetricSummary&) const = default;
};

struct ConditionReport {
  std::size_t images = 0;
  MetricSummary map50;
  std::array<std::optional<MetricSummary>, kNumClasses> per_class_ap50;

  bool operator==(const ConditionReport&) const = default;
};

struct EvalReport {
  std::size_t bootstrap = 0;
  std::uint64_t seed = 0;
  double iou_threshold = kDefaultIouThreshold;
  std::map<WeatherCondition, ConditionReport> conditions;

  bool operator==(const EvalReport&) const = default;
};

struct BootstrapOptions {
  std::size_t resamples = kDefaultBootstrapSamples;
  std::uint64_t seed = 0;
  double iou_threshold = kDefaultIouThreshold;
  int workers = 1;
};

/// Resamples each condition's test images with replacement (same size, B times) and
/// summarises mAP50 and per-class AP50. Test images are the records assigned "test";
/// when nothing is assigned, every record is used.
EvalReport bootstrap_evaluate(const std::vector<PredictionLine>& predictions,
                              const DatasetManifest& manifest, const BootstrapOptions& options);

nlohmann::json report_to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& j);

enum class ReportFormat { kTextTable, kCsv };

struct NamedReport {
  std::string approach;
  EvalReport report;
};

/// "m ± s" with both rounded to three decimals and trailing zeros trimmed.
std::string format_cell(double mean, double std);

/// Rows are conditions; columns are (approach, metric). CSV carries full precision.
std::string render_report(std::span<const NamedReport> reports, ReportFormat format);

}  // namespace wxaug
