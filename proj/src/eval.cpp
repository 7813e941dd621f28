#include "wxaug/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "wxaug/seed.hpp"

namespace wxaug {

using nlohmann::json;

double iou(const BBox& a, const BBox& b) {
  const double iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double ih = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (iw <= 0 || ih <= 0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return uni > 0 ? inter / uni : 0.0;
}

MatchResult match_detections(std::span<const Prediction> predictions,
                             std::span<const Annotation> ground_truth, double iou_threshold) {
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) {
    throw EvalError("iou threshold must lie in (0, 1]");
  }
  MatchResult result;
  for (const auto& g : ground_truth) ++result.gt_counts[index_of(g.cls)];

  for (ObjectClass cls : kAllClasses) {
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
      if (predictions[i].cls == cls) order.push_back(i);
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return predictions[a].confidence > predictions[b].confidence;
    });

    std::vector<std::size_t> gts;
    for (std::size_t j = 0; j < ground_truth.size(); ++j) {
      if (ground_truth[j].cls == cls) gts.push_back(j);
    }
    std::vector<char> taken(gts.size(), 0);

    for (std::size_t i : order) {
      double best = -1.0;
      std::size_t best_k = gts.size();
      for (std::size_t k = 0; k < gts.size(); ++k) {
        if (taken[k]) continue;
        const double v = iou(predictions[i].bbox, ground_truth[gts[k]].bbox);
        if (v > best) {
          best = v;
          best_k = k;
        }
      }
      const bool tp = best_k < gts.size() && best >= iou_threshold;
      if (tp) taken[best_k] = 1;
      result.detections.push_back({predictions[i].confidence, tp, cls});
    }
  }
  return result;
}

std::optional<double> average_precision(std::vector<RankedDetection> detections,
                                        std::size_t gt_count) {
  if (gt_count == 0) return std::nullopt;
  std::stable_sort(detections.begin(), detections.end(),
                   [](const RankedDetection& a, const RankedDetection& b) {
                     return a.confidence > b.confidence;
                   });
  const std::size_t n = detections.size();
  std::vector<double> precision(n);
  std::size_t tp = 0;
  for (std::size_t k = 0; k < n; ++k) {
    if (detections[k].true_positive) ++tp;
    precision[k] = static_cast<double>(tp) / static_cast<double>(k + 1);
  }
  // Precision envelope: best precision at this recall or any higher one.
  for (std::size_t k = n; k-- > 1;) precision[k - 1] = std::max(precision[k - 1], precision[k]);

  // Recall moves by 1/G exactly at each true positive.
  double area = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (detections[k].true_positive) area += precision[k];
  }
  return area / static_cast<double>(gt_count);
}

std::optional<MapResult> map_from_matches(std::span<const MatchResult* const> images) {
  std::array<std::vector<RankedDetection>, kNumClasses> pooled;
  std::array<std::size_t, kNumClasses> gt{};
  for (const MatchResult* m : images) {
    for (std::size_t c = 0; c < kNumClasses; ++c) gt[c] += m->gt_counts[c];
    for (const auto& d : m->detections) {
      pooled[index_of(d.cls)].push_back({d.confidence, d.true_positive});
    }
  }

  MapResult result;
  double sum = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    result.per_class[c] = average_precision(std::move(pooled[c]), gt[c]);
    if (result.per_class[c]) {
      sum += *result.per_class[c];
      ++present;
    }
  }
  if (present == 0) return std::nullopt;
  result.map50 = sum / static_cast<double>(present);
  return result;
}

MapResult map50(std::span<const ImageEval> images, double iou_threshold) {
  if (images.empty()) throw EvalError("empty image set");
  std::vector<MatchResult> matches;
  matches.reserve(images.size());
  for (const auto& img : images) {
    matches.push_back(match_detections(img.predictions, img.ground_truth, iou_threshold));
  }
  std::vector<const MatchResult*> ptrs;
  for (const auto& m : matches) ptrs.push_back(&m);
  auto result = map_from_matches(ptrs);
  if (!result) throw EvalError("image set has no ground-truth instances; mAP is undefined");
  return *result;
}

namespace {

// Welford running moments; a constant sequence yields exactly zero spread.
class RunningStats {
 public:
  void add(double x) {
    ++n_;
    const double delta = x - mean_;
    mean_ += delta / static_cast<double>(n_);
    m2_ += delta * (x - mean_);
  }
  std::size_t count() const { return n_; }
  MetricSummary summary() const {
    return {mean_, n_ > 0 ? std::sqrt(std::max(0.0, m2_ / static_cast<double>(n_))) : 0.0, n_};
  }

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn fn) {
  const std::size_t threads = std::min<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
}

}  // namespace

EvalReport bootstrap_evaluate(const std::vector<PredictionLine>& predictions,
                              const DatasetManifest& manifest, const BootstrapOptions& options) {
  if (options.resamples < 1) throw EvalError("bootstrap needs at least one resample");

  bool any_test = false;
  for (const auto& [id, split] : manifest.splits) any_test = any_test || split == Split::kTest;

  std::map<WeatherCondition, std::vector<const ImageRecord*>> by_condition;
  std::unordered_map<std::string, std::vector<Prediction>> preds_by_image;
  for (const auto& r : manifest.records) {
    if (any_test && manifest.split_of(r.id) != Split::kTest) continue;
    by_condition[r.condition].push_back(&r);
    preds_by_image.emplace(r.id, std::vector<Prediction>{});
  }
  if (by_condition.empty()) throw EvalError("the manifest has no test images");

  std::unordered_set<std::string_view> known;
  for (const auto& r : manifest.records) known.insert(r.id);
  for (const auto& p : predictions) {
    auto it = preds_by_image.find(p.image_id);
    if (it == preds_by_image.end()) {
      // Predictions for training or validation images are ignored.
      if (known.contains(p.image_id)) continue;
      throw EvalError("prediction for unknown image '" + p.image_id + "'");
    }
    it->second.push_back(p.prediction);
  }

  EvalReport report;
  report.bootstrap = options.resamples;
  report.seed = options.seed;
  report.iou_threshold = options.iou_threshold;

  for (auto& [condition, records] : by_condition) {
    // Resample streams index images by sorted id, so manifest order is irrelevant.
    std::sort(records.begin(), records.end(),
              [](const ImageRecord* a, const ImageRecord* b) { return a->id < b->id; });
    const std::size_t n = records.size();
    std::vector<MatchResult> matches;
    matches.reserve(n);
    for (const ImageRecord* r : records) {
      matches.push_back(match_detections(preds_by_image.at(r->id), r->annotations,
                                         options.iou_threshold));
    }

    std::vector<std::optional<MapResult>> slots(options.resamples);
    const std::string condition_name(to_string(condition));
    parallel_for(options.resamples, options.workers, [&](std::size_t b) {
      std::mt19937_64 rng(derive_seed(options.seed, {"bootstrap", condition_name, std::to_string(b)}));
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      std::vector<const MatchResult*> sample(n);
      for (auto& s : sample) s = &matches[pick(rng)];
      slots[b] = map_from_matches(sample);
    });

    RunningStats map_stats;
    std::array<RunningStats, kNumClasses> class_stats;
    for (const auto& slot : slots) {
      if (!slot) continue;
      map_stats.add(slot->map50);
      for (std::size_t c = 0; c < kNumClasses; ++c) {
        if (slot->per_class[c]) class_stats[c].add(*slot->per_class[c]);
      }
    }
    if (map_stats.count() == 0) {
      throw EvalError("condition " + condition_name + " has no ground-truth instances");
    }

    ConditionReport cr;
    cr.images = n;
    cr.map50 = map_stats.summary();
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      if (class_stats[c].count() > 0) cr.per_class_ap50[c] = class_stats[c].summary();
    }
    report.conditions[condition] = cr;
  }
  return report;
}

namespace {

json summary_json(const MetricSummary& s) {
  return json{{"mean", s.mean}, {"std", s.std}, {"defined", s.defined}};
}

MetricSummary summary_from_json(const json& j) {
  return {j.at("mean").get<double>(), j.at("std").get<double>(), j.at("defined").get<std::size_t>()};
}

std::string capitalize(std::string_view s) {
  std::string out(s);
  bool start = true;
  for (auto& ch : out) {
    if (ch == '_') {
      ch = ' ';
      start = true;
    } else if (start) {
      ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
      start = false;
    }
  }
  return out;
}

std::string trim_decimal(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  std::string s(buf);
  while (!s.empty() && s.back() == '0') s.pop_back();
  if (!s.empty() && s.back() == '.') s.pop_back();
  if (s == "-0") s = "0";
  return s;
}

std::string full_precision(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::size_t display_width(const std::string& s) {
  std::size_t w = 0;
  for (unsigned char c : s) {
    if ((c & 0xC0) != 0x80) ++w;
  }
  return w;
}

}  // namespace

json report_to_json(const EvalReport& report) {
  json conditions = json::object();
  for (const auto& [condition, cr] : report.conditions) {
    json per_class = json::object();
    for (ObjectClass cls : kAllClasses) {
      const auto& s = cr.per_class_ap50[index_of(cls)];
      per_class[std::string(to_string(cls))] = s ? summary_json(*s) : json(nullptr);
    }
    conditions[std::string(to_string(condition))] =
        json{{"images", cr.images}, {"map50", summary_json(cr.map50)}, {"per_class_ap50", per_class}};
  }
  return json{{"bootstrap", report.bootstrap},
              {"seed", report.seed},
              {"iou_threshold", report.iou_threshold},
              {"conditions", std::move(conditions)}};
}

EvalReport report_from_json(const json& j) {
  EvalReport report;
  try {
    report.bootstrap = j.at("bootstrap").get<std::size_t>();
    report.seed = j.at("seed").get<std::uint64_t>();
    report.iou_threshold = j.at("iou_threshold").get<double>();
    for (const auto& [name, jc] : j.at("conditions").items()) {
      auto condition = parse_condition(name);
      if (!condition) throw EvalError("report: unknown condition '" + name + "'");
      ConditionReport cr;
      cr.images = jc.at("images").get<std::size_t>();
      cr.map50 = summary_from_json(jc.at("map50"));
      for (ObjectClass cls : kAllClasses) {
        const json& s = jc.at("per_class_ap50").at(std::string(to_string(cls)));
        if (!s.is_null()) cr.per_class_ap50[index_of(cls)] = summary_from_json(s);
      }
      report.conditions[*condition] = cr;
    }
  } catch (const json::exception& e) {
    throw EvalError(std::string("malformed report: ") + e.what());
  }
  return report;
}

std::string format_cell(double mean, double std) {
  return trim_decimal(mean) + " ± " + trim_decimal(std);
}

std::string render_report(std::span<const NamedReport> reports, ReportFormat format) {
  std::vector<WeatherCondition> rows;
  for (WeatherCondition c : kAllConditions) {
    for (const auto& r : reports) {
      if (r.report.conditions.contains(c)) {
        rows.push_back(c);
        break;
      }
    }
  }

  if (format == ReportFormat::kCsv) {
    std::string out = "condition,approach,metric,mean,std,defined\n";
    for (WeatherCondition c : rows) {
      for (const auto& r : reports) {
        auto it = r.report.conditions.find(c);
        if (it == r.report.conditions.end()) continue;
        auto line = [&](const std::string& metric, const MetricSummary& s) {
          out += std::string(to_string(c)) + "," + r.approach + "," + metric + "," +
                 full_precision(s.mean) + "," + full_precision(s.std) + "," +
                 std::to_string(s.defined) + "\n";
        };
        line("map50", it->second.map50);
        for (ObjectClass cls : kAllClasses) {
          if (const auto& s = it->second.per_class_ap50[index_of(cls)]) {
            line("ap50_" + std::string(to_string(cls)), *s);
          }
        }
      }
    }
    return out;
  }

  const bool several = reports.size() > 1;
  std::vector<std::vector<std::string>> table;
  std::vector<std::string> header{"Weather Condition"};
  for (const auto& r : reports) {
    const std::string prefix = several ? r.approach + " " : "";
    header.push_back(prefix + "mAP50");
    for (ObjectClass cls : kAllClasses) header.push_back(prefix + capitalize(to_string(cls)));
  }
  table.push_back(std::move(header));
  for (WeatherCondition c : rows) {
    std::vector<std::string> row{capitalize(to_string(c))};
    for (const auto& r : reports) {
      auto it = r.report.conditions.find(c);
      if (it == r.report.conditions.end()) {
        row.insert(row.end(), 1 + kNumClasses, "-");
        continue;
      }
      row.push_back(format_cell(it->second.map50.mean, it->second.map50.std));
      for (ObjectClass cls : kAllClasses) {
        const auto& s = it->second.per_class_ap50[index_of(cls)];
        row.push_back(s ? format_cell(s->mean, s->std) : "-");
      }
    }
    table.push_back(std::move(row));
  }

  std::vector<std::size_t> widths(table.front().size(), 0);
  for (const auto& row : table) {
    for (std::size_t i = 0; i < row.size(); ++i) widths[i] = std::max(widths[i], display_width(row[i]));
  }
  std::string out;
  for (std::size_t r = 0; r < table.size(); ++r) {
    for (std::size_t i = 0; i < table[r].size(); ++i) {
      out += i == 0 ? "| " : " | ";
      out += table[r][i];
      out.append(widths[i] - display_width(table[r][i]), ' ');
    }
    out += " |\n";
    if (r == 0) {
      for (std::size_t i = 0; i < widths.size(); ++i) {
        out += i == 0 ? "|-" : "-|-";
        out.append(widths[i], '-');
      }
      out += "-|\n";
    }
  }
  return out;
}

}  // namespace wxaug
