#include "wxaug/cli.hpp"

#include <algorithm>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include "logging.hpp"
#include "wxaug/augment.hpp"
#include "wxaug/backend.hpp"
#include "wxaug/bdd100k.hpp"
#include "wxaug/carla_ingest.hpp"
#include "wxaug/composer.hpp"
#include "wxaug/diffusion.hpp"
#include "wxaug/eval.hpp"
#include "wxaug/image.hpp"
#include "wxaug/io.hpp"
#include "wxaug/manifest.hpp"
#include "wxaug/mask_boxes.hpp"
#include "wxaug/review.hpp"
#include "wxaug/review_server.hpp"

namespace wxaug::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename T>
T parse_or_throw(std::optional<T> v, std::string_view what, std::string_view text) {
  if (!v) throw UsageError("unknown " + std::string(what) + " '" + std::string(text) + "'");
  return *v;
}

WeatherCondition condition_arg(const std::string& s) { return parse_or_throw(parse_condition(s), "condition", s); }
Framework framework_arg(const std::string& s) { return parse_or_throw(parse_framework(s), "framework", s); }

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string version_text() {
  return std::string(kToolName) + " " + std::string(kToolVersion) + " (manifest schema " +
         std::string(kManifestSchemaVersion) + ")";
}

// Outputs never overwrite inputs.
void guard_output(const fs::path& out, std::initializer_list<fs::path> inputs) {
  const auto target = fs::weakly_canonical(out);
  for (const auto& in : inputs) {
    if (!in.empty() && fs::weakly_canonical(in) == target) {
      throw UsageError("output " + out.string() + " would overwrite input " + in.string());
    }
  }
}

void save_checked(const DatasetManifest& m, const fs::path& path) {
  auto violations = validate_manifest(m);
  if (!violations.empty()) {
    throw std::runtime_error("refusing to write an invalid manifest: " + describe(violations.front()));
  }
  save_manifest(m, path.string());
}

std::string relative_to(const fs::path& file, const fs::path& root) {
  return fs::absolute(file).lexically_normal().lexically_relative(fs::absolute(root).lexically_normal()).generic_string();
}

std::string error_kind(const std::exception& e) {
  if (dynamic_cast<const UsageError*>(&e)) return "usage";
  if (dynamic_cast<const ManifestError*>(&e)) return "manifest";
  if (dynamic_cast<const ComposeError*>(&e)) return "compose";
  if (dynamic_cast<const EvalError*>(&e)) return "evaluation";
  if (dynamic_cast<const ReviewError*>(&e)) return "review";
  if (dynamic_cast<const AugmentError*>(&e)) return "augment";
  if (dynamic_cast<const BackendError*>(&e)) return "backend";
  if (dynamic_cast<const IngestError*>(&e)) return "ingest";
  if (dynamic_cast<const ImageError*>(&e)) return "image";
  if (dynamic_cast<const json::exception*>(&e)) return "json";
  if (dynamic_cast<const fs::filesystem_error*>(&e)) return "filesystem";
  return "runtime";
}

// Values from --config become flags unless the command line already sets them.
void inject_config(const json& config, const CLI::App& root, const CLI::App* leaf,
                   std::vector<std::string>& args) {
  if (!config.is_object()) throw UsageError("config file must hold a JSON object");
  json merged = json::object();
  for (const auto& [k, v] : config.items()) {
    if (!v.is_object()) merged[k] = v;
  }
  // Sections named after a command ("evaluate", "review", ...) override the top level,
  // and a subcommand's section overrides its parent's.
  std::vector<const CLI::App*> chain;
  for (const CLI::App* app = leaf; app != nullptr && app != &root; app = app->get_parent()) {
    chain.push_back(app);
  }
  for (auto app = chain.rbegin(); app != chain.rend(); ++app) {
    if (auto it = config.find((*app)->get_name()); it != config.end() && it->is_object()) {
      for (const auto& [k, v] : it->items()) {
        if (!v.is_object()) merged[k] = v;
      }
    }
  }

  for (const auto& [key, value] : merged.items()) {
    if (value.is_object()) continue;
    std::string name = key;
    std::replace(name.begin(), name.end(), '_', '-');
    const std::string flag = "--" + name;
    const CLI::Option* opt = leaf ? leaf->get_option_no_throw(flag) : nullptr;
    if (!opt) opt = root.get_option_no_throw(flag);
    if (!opt || name == "config") continue;
    const bool given = std::any_of(args.begin(), args.end(), [&](const std::string& a) {
      return a == flag || a.rfind(flag + "=", 0) == 0;
    });
    if (given) continue;

    auto scalar = [](const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
    if (value.is_boolean()) {
      if (value.get<bool>()) args.push_back(flag);
    } else if (value.is_array()) {
      for (const auto& item : value) args.push_back(flag + "=" + scalar(item));
    } else if (!value.is_null()) {
      args.push_back(flag + "=" + scalar(value));
    }
  }
}

httplib::Server* g_server = nullptr;

extern "C" void stop_server(int) {
  if (g_server) g_server->stop();
}

struct Shared {
  std::string config;
  int max_in_flight = 1;
};

struct ImportBddArgs {
  std::string labels, image_prefix, out;
  std::vector<std::string> weather{"clear"}, timeofday{"daytime"};
};

struct IngestCarlaArgs {
  std::string frames, rgb_dir, seg_dir, condition = "default", seg_channel = "red";
  std::string image_root = ".", append, out;
  double min_visible = kDefaultMinVisibleFraction;
};

struct MaskBoxesArgs {
  std::string manifest, masks, class_map, image_root = ".", seg_channel = "gray", out;
  int connectivity = 8;
  int min_area = kDefaultMinArea;
};

struct RecipesArgs {
  std::string framework, format = "json";
};

struct AugmentArgs {
  std::string manifest, framework, backend = "mock", image_root = ".", out;
  std::vector<std::string> recipes, splits;
  bool no_builtin = false;
  std::optional<std::uint64_t> seed;
  int max_retries = 2;
};

struct ReviewArgs {
  std::string manifest, log, image_root = ".", ui_dir, host = "127.0.0.1", out;
  std::vector<std::string> recipes;
  int port = 8080;
  bool allow_pending = false;
  std::string image_id, verdict, reviewer = "cli";
};

struct ComposeArgs {
  std::string manifest, mode = "augmented", fractions, split = "0.7,0.3", out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> train_size, val_size;
};

struct TestsetArgs {
  std::string manifest, out;
  std::vector<std::string> conditions;
  std::size_t per_condition = 0;
  std::optional<std::uint64_t> seed;
};

struct EvaluateArgs {
  std::string manifest, predictions, out;
  std::size_t bootstrap = kDefaultBootstrapSamples;
  std::optional<std::uint64_t> seed;
  double iou = kDefaultIouThreshold;
  int workers = 1;
};

struct ReportArgs {
  std::vector<std::string> inputs;
  std::string format = "table", out;
};

struct DiffusionArgs {
  std::string betas = "0.1,0.2,0.3,0.4";
  double x0 = 1.0;
  std::size_t samples = 100000;
  std::optional<std::uint64_t> seed;
};

std::uint64_t require_seed(const std::optional<std::uint64_t>& seed, Logger& log) {
  if (!seed) throw UsageError("--seed is required for sampling commands");
  log.info("seed", {{"effective_seed", *seed}});
  return *seed;
}

int cmd_import_bdd(const ImportBddArgs& a, std::ostream& out, Logger& log) {
  guard_output(a.out, {a.labels});
  BddFilter filter;
  filter.weather = {a.weather.begin(), a.weather.end()};
  filter.timeofday = {a.timeofday.begin(), a.timeofday.end()};
  auto result = import_bdd100k(read_text_file(a.labels), a.image_prefix, filter);
  save_checked(result.manifest, a.out);
  log.info("imported", {{"entries", result.entries},
                        {"records", result.manifest.records.size()},
                        {"excluded", result.excluded},
                        {"unknown_weather_skipped", result.unknown_weather_skipped},
                        {"unmapped_labels", result.unmapped_labels},
                        {"degenerate_boxes", result.degenerate_boxes}});
  out << "imported " << result.manifest.records.size() << " of " << result.entries
      << " entries (" << result.excluded << " outside the filter, " << result.unknown_weather_skipped
      << " with unknown weather) -> " << a.out << "\n";
  return 0;
}

int cmd_ingest_carla(const IngestCarlaArgs& a, std::ostream& out, Logger& log) {
  guard_output(a.out, {a.frames, a.append});
  const auto condition = condition_arg(a.condition);
  const SegChannel channel = a.seg_channel == "gray" ? SegChannel::kGray : SegChannel::kRed;
  if (a.seg_channel != "gray" && a.seg_channel != "red") throw UsageError("--seg-channel must be red or gray");

  DatasetManifest manifest;
  manifest.framework = Framework::kSimulated;
  if (!a.append.empty()) {
    manifest = load_manifest(a.append);
    if (manifest.framework != Framework::kSimulated) throw UsageError("--append manifest is not simulated");
  }

  std::size_t removed = 0;
  const auto frames = parse_carla_frames(read_text_file(a.frames));
  for (const auto& frame : frames) {
    const fs::path rgb = fs::path(a.rgb_dir) / (frame.frame_id + ".png");
    const fs::path seg_path = fs::path(a.seg_dir) / (frame.frame_id + ".png");
    const Image image = read_image(rgb);
    const SegmentationImage seg = segmentation_from_image(read_image(seg_path), channel);
    ImageRecord rec = ingest_carla_frame(image.size(), seg, frame.boxes, condition, a.min_visible,
                                         frame.frame_id, relative_to(rgb, a.image_root));
    removed += frame.boxes.size() - rec.annotations.size();
    manifest.records.push_back(std::move(rec));
  }
  manifest.canonicalize();
  save_checked(manifest, a.out);
  log.info("ingested", {{"frames", frames.size()}, {"ghost_boxes_removed", removed},
                        {"min_visible_fraction", a.min_visible}});
  out << "ingested " << frames.size() << " frames, removed " << removed << " occluded boxes -> "
      << a.out << "\n";
  return 0;
}

int cmd_mask_boxes(const MaskBoxesArgs& a, std::ostream& out, Logger& log) {
  guard_output(a.out, {a.manifest, a.class_map});
  if (a.connectivity != 4 && a.connectivity != 8) throw UsageError("--connectivity must be 4 or 8");
  if (a.seg_channel != "gray" && a.seg_channel != "red") throw UsageError("--seg-channel must be red or gray");
  const SegChannel channel = a.seg_channel == "gray" ? SegChannel::kGray : SegChannel::kRed;
  const Connectivity conn = a.connectivity == 4 ? Connectivity::kFour : Connectivity::kEight;
  const ClassMap class_map = parse_class_map(read_text_file(a.class_map));

  DatasetManifest manifest = load_manifest(a.manifest);
  std::size_t enriched = 0, added = 0, skipped_augmented = 0;
  for (auto& rec : manifest.records) {
    const fs::path mask = fs::path(a.masks) / (rec.id + ".png");
    if (!fs::exists(mask)) continue;
    if (rec.is_augmented()) {
      ++skipped_augmented;
      continue;
    }
    const SegmentationImage seg = segmentation_from_image(read_image(mask), channel);
    const ImageSize size = read_image(fs::path(a.image_root) / rec.image_path).size();
    const std::size_t before = rec.annotations.size();
    rec = enrich_record(rec, size, seg, class_map, conn, a.min_area);
    added += rec.annotations.size() - before;
    ++enriched;
  }
  save_checked(manifest, a.out);
  if (skipped_augmented > 0) {
    log.warn("augmented_masks_ignored", {{"count", skipped_augmented}});
  }
  log.info("mask_boxes", {{"records", enriched}, {"boxes_added", added},
                          {"connectivity", a.connectivity}, {"min_area", a.min_area}});
  out << "added " << added << " boxes to " << enriched << " records -> " << a.out << "\n";
  return 0;
}

int cmd_recipes(const RecipesArgs& a, std::ostream& out) {
  const auto recipes = builtin_recipes(framework_arg(a.framework));
  if (a.format == "json") {
    out << serialize_recipes(recipes);
    return 0;
  }
  if (a.format != "text") throw UsageError("--format must be json or text");
  for (const auto& r : recipes) {
    out << r.id << " (" << to_string(r.condition) << ")\n";
    for (const auto& s : r.steps) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "guidance %g, %d steps", s.guidance_scale, s.inference_steps);
      out << "  \"" << s.prompt << "\" " << buf << "\n";
    }
  }
  return 0;
}

std::vector<Recipe> load_recipes(Framework framework, const std::vector<std::string>& files,
                                 bool include_builtin) {
  std::vector<Recipe> recipes;
  if (include_builtin) recipes = builtin_recipes(framework);
  for (const auto& f : files) {
    auto extra = parse_recipes(read_text_file(f));
    recipes.insert(recipes.end(), extra.begin(), extra.end());
  }
  return recipes;
}

int cmd_augment(const AugmentArgs& a, const Shared& shared, std::ostream& out, Logger& log) {
  const std::uint64_t seed = require_seed(a.seed, log);
  const Framework framework = framework_arg(a.framework);
  const DatasetManifest manifest = load_manifest(a.manifest);
  if (manifest.framework != framework) {
    throw UsageError("manifest framework is " + std::string(to_string(manifest.framework)) +
                     ", not " + a.framework);
  }
  const fs::path manifest_out = fs::path(a.out) / "manifest.json";
  guard_output(manifest_out, {a.manifest});

  const auto recipes = load_recipes(framework, a.recipes, !a.no_builtin);
  std::unique_ptr<EditBackend> backend;
  if (a.backend == "mock") {
    backend = std::make_unique<MockBackend>();
  } else {
    backend = std::make_unique<HttpBackend>(a.backend);
  }

  AugmentOptions options;
  options.seed = seed;
  options.max_in_flight = shared.max_in_flight;
  options.image_root = a.image_root;
  options.output_dir = fs::path(a.out) / "images";
  options.retry.max_retries = a.max_retries;
  for (const auto& s : a.splits) options.splits.insert(parse_or_throw(parse_split(s), "split", s));

  log.info("augment_start", {{"recipes", recipes.size()}, {"backend", a.backend},
                             {"max_in_flight", shared.max_in_flight}});
  const AugmentResult result = run_augmentation(manifest, recipes, *backend, options);
  save_checked(result.manifest, manifest_out);
  for (const auto& f : result.failures) {
    log.error("augment_failed", {{"source_id", f.source_id}, {"recipe_id", f.recipe_id},
                                 {"message", f.message}});
  }
  log.info("augment_done", {{"generated", result.generated},
                            {"skipped_existing", result.skipped_existing},
                            {"failed", result.failures.size()}});
  out << "generated " << result.generated << " augmented images (" << result.skipped_existing
      << " already present, " << result.failures.size() << " failed) -> " << manifest_out.string()
      << "\n";
  return result.failures.empty() ? 0 : 1;
}

int cmd_review_serve(const ReviewArgs& a, std::ostream& out, Logger& log) {
  DatasetManifest manifest = load_manifest(a.manifest);
  const auto recipes = load_recipes(manifest.framework, a.recipes, true);
  ReviewService service(ReviewSession::open(std::move(manifest), a.log), a.image_root, recipes);
  httplib::Server server;
  std::optional<fs::path> ui;
  if (!a.ui_dir.empty()) ui = a.ui_dir;
  service.mount(server, ui);

  int port = a.port;
  if (port == 0) {
    port = server.bind_to_any_port(a.host);
  } else if (!server.bind_to_port(a.host, port)) {
    port = -1;
  }
  if (port < 0) throw std::runtime_error("cannot bind " + a.host + ":" + std::to_string(a.port));
  log.info("listening", {{"host", a.host}, {"port", port}, {"log", a.log}});
  out << "review service on http://" << a.host << ":" << port << "\n" << std::flush;

  g_server = &server;
  std::signal(SIGINT, stop_server);
  std::signal(SIGTERM, stop_server);
  server.listen_after_bind();
  g_server = nullptr;
  log.info("stopped");
  return 0;
}

int cmd_review_finalize(const ReviewArgs& a, std::ostream& out, Logger& log) {
  guard_output(a.out, {a.manifest, a.log});
  ReviewSession session(load_manifest(a.manifest), read_log(a.log));
  const FinalizeResult result = finalize_filtered(session.effective_manifest(), a.allow_pending);
  save_checked(result.manifest, a.out);
  json counts = json::object();
  for (const auto& [condition, c] : result.counts) {
    counts[std::string(to_string(condition))] = {{"kept", c.kept},
                                                 {"rejected_hallucination", c.rejected_hallucination},
                                                 {"rejected_unrealistic", c.rejected_unrealistic},
                                                 {"dropped_pending", c.dropped_pending}};
    out << to_string(condition) << ": kept " << c.kept << ", rejected " << c.rejected_hallucination
        << " hallucination + " << c.rejected_unrealistic << " unrealistic";
    if (c.dropped_pending > 0) out << ", dropped " << c.dropped_pending << " pending";
    out << "\n";
  }
  log.info("finalized", {{"counts", counts}, {"out", a.out}});
  return 0;
}

int cmd_review_decide(const ReviewArgs& a, std::ostream& out, Logger& log) {
  ReviewSession session = ReviewSession::open(load_manifest(a.manifest), a.log);
  ReviewDecision d;
  d.image_id = a.image_id;
  d.verdict = parse_or_throw(parse_verdict(a.verdict), "verdict", a.verdict);
  d.reviewer = a.reviewer;
  d.timestamp = now_utc();
  const bool appended = session.record_decision(d);
  const json j = {{"image_id", d.image_id},
                  {"review_state", to_string(session.state_of(d.image_id))},
                  {"appended", appended}};
  log.info("decision", j);
  out << j.dump() << "\n";
  return 0;
}

int cmd_review_progress(const ReviewArgs& a, std::ostream& out) {
  ReviewSession session(load_manifest(a.manifest), read_log(a.log));
  out << progress_to_json(session.progress()).dump(2) << "\n";
  return 0;
}

int cmd_compose(const ComposeArgs& a, std::ostream& out, Logger& log) {
  guard_output(a.out, {a.manifest, a.fractions});
  CompositionSpec spec;
  spec.seed = require_seed(a.seed, log);
  ComposeMode mode;
  if (a.mode == "basic") {
    mode = ComposeMode::kBasic;
  } else if (a.mode == "augmented") {
    mode = ComposeMode::kAugmented;
  } else {
    throw UsageError("--mode must be basic or augmented");
  }
  if (!a.fractions.empty()) {
    spec.fractions = parse_fractions(read_text_file(a.fractions));
  } else if (mode == ComposeMode::kBasic) {
    spec.fractions = {{WeatherCondition::kDefault, 1.0}};
  } else {
    throw UsageError("--fractions is required in augmented mode");
  }
  const auto parts = split_list(a.split);
  if (parts.size() != 2) throw UsageError("--split takes two fractions, e.g. 0.7,0.3");
  try {
    spec.train_fraction = std::stod(parts[0]);
    spec.val_fraction = std::stod(parts[1]);
  } catch (const std::exception&) {
    throw UsageError("--split takes two fractions, e.g. 0.7,0.3");
  }
  spec.train_size = a.train_size;
  spec.val_size = a.val_size;

  const DatasetManifest composed = compose(load_manifest(a.manifest), spec, mode);
  save_checked(composed, a.out);

  std::map<Split, std::map<WeatherCondition, std::size_t>> counts;
  for (const auto& r : composed.records) {
    const Split s = composed.split_of(r.id);
    if (s == Split::kTrain || s == Split::kVal) ++counts[s][r.condition];
  }
  json summary = json::object();
  for (const auto& [split, by_condition] : counts) {
    out << to_string(split) << ":";
    for (const auto& [condition, n] : by_condition) {
      out << " " << to_string(condition) << "=" << n;
      summary[std::string(to_string(split))][std::string(to_string(condition))] = n;
    }
    out << "\n";
  }
  log.info("composed", {{"mode", a.mode}, {"counts", summary}, {"out", a.out}});
  return 0;
}

int cmd_testset(const TestsetArgs& a, std::ostream& out, Logger& log) {
  guard_output(a.out, {a.manifest});
  const std::uint64_t seed = require_seed(a.seed, log);
  std::vector<WeatherCondition> conditions;
  for (const auto& c : a.conditions) {
    for (const auto& part : split_list(c)) conditions.push_back(condition_arg(part));
  }
  if (conditions.empty()) throw UsageError("--conditions lists no conditions");
  const DatasetManifest m = build_test_set(load_manifest(a.manifest), a.per_condition, conditions, seed);
  save_checked(m, a.out);
  log.info("testset", {{"per_condition", a.per_condition}, {"conditions", conditions.size()}});
  out << "test set: " << a.per_condition << " images x " << conditions.size() << " conditions = "
      << a.per_condition * conditions.size() << " -> " << a.out << "\n";
  return 0;
}

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out, Logger& log) {
  guard_output(a.out, {a.manifest, a.predictions});
  BootstrapOptions options;
  options.seed = require_seed(a.seed, log);
  options.resamples = a.bootstrap;
  options.iou_threshold = a.iou;
  options.workers = a.workers;
  const EvalReport report = bootstrap_evaluate(parse_predictions(read_text_file(a.predictions)),
                                               load_manifest(a.manifest), options);
  write_file(a.out, report_to_json(report).dump(2) + "\n");
  log.info("evaluated", {{"bootstrap", a.bootstrap}, {"conditions", report.conditions.size()},
                         {"out", a.out}});
  const NamedReport named{"model", report};
  out << render_report(std::span(&named, 1), ReportFormat::kTextTable);
  return 0;
}

int cmd_report(const ReportArgs& a, std::ostream& out, Logger& log) {
  ReportFormat format;
  if (a.format == "table") {
    format = ReportFormat::kTextTable;
  } else if (a.format == "csv") {
    format = ReportFormat::kCsv;
  } else {
    throw UsageError("--format must be table or csv");
  }
  std::vector<NamedReport> reports;
  for (const auto& spec : a.inputs) {
    // "name=path" labels a report; a bare path is labelled by its file stem.
    const auto eq = spec.find('=');
    const std::string path = eq == std::string::npos ? spec : spec.substr(eq + 1);
    const std::string name = eq == std::string::npos ? fs::path(spec).stem().string() : spec.substr(0, eq);
    reports.push_back({name, report_from_json(json::parse(read_text_file(path)))});
  }
  const std::string text = render_report(reports, format);
  if (a.out.empty()) {
    out << text;
  } else {
    write_file(a.out, text);
    log.info("report_written", {{"out", a.out}});
  }
  return 0;
}

int cmd_diffusion_demo(const DiffusionArgs& a, std::ostream& out, Logger& log) {
  const std::uint64_t seed = require_seed(a.seed, log);
  std::vector<double> betas;
  for (const auto& s : split_list(a.betas)) betas.push_back(std::stod(s));
  const diffusion::NoiseSchedule schedule(betas);
  if (a.samples < 2) throw UsageError("--samples must be at least 2");

  const std::size_t T = schedule.steps();
  std::vector<double> sum(T, 0.0), sum_sq(T, 0.0);
  diffusion::Rng rng(seed);
  for (std::size_t i = 0; i < a.samples; ++i) {
    diffusion::Vector x{a.x0};
    for (std::size_t t = 1; t <= T; ++t) {
      x = diffusion::forward_step(x, schedule.beta(t), rng);
      sum[t - 1] += x[0];
      sum_sq[t - 1] += x[0] * x[0];
    }
  }
  const double n = static_cast<double>(a.samples);
  out << "t  beta      mc_mean    exact_mean  mc_var     exact_var\n";
  for (std::size_t t = 1; t <= T; ++t) {
    const double mean = sum[t - 1] / n;
    const double var = (sum_sq[t - 1] - n * mean * mean) / (n - 1);
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-2zu %-9.4g %-10.5f %-11.5f %-10.5f %-10.5f\n", t,
                  schedule.beta(t), mean, schedule.mean_scale(t) * a.x0, var,
                  schedule.marginal_variance(t));
    out << buf;
  }
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& input, std::ostream& out, std::ostream& err) {
  CLI::App app{"Weather augmentation pipeline for object-detection datasets", std::string(kToolName)};
  app.require_subcommand(1);
  app.fallthrough();
  Shared shared;
  app.add_option("--config", shared.config, "JSON file of option values; flags win")->check(CLI::ExistingFile);
  app.add_option("--max-in-flight", shared.max_in_flight, "Cap on concurrent backend requests")
      ->check(CLI::PositiveNumber);
  app.set_version_flag("--version", version_text());

  ImportBddArgs bdd;
  auto* import_bdd = app.add_subcommand("import-bdd", "Build a real-world manifest from BDD100K labels");
  import_bdd->add_option("--labels", bdd.labels, "BDD100K label JSON")->required()->check(CLI::ExistingFile);
  import_bdd->add_option("--image-prefix", bdd.image_prefix, "Prefix joined to each image name");
  import_bdd->add_option("--weather", bdd.weather, "Accepted weather attribute values")->delimiter(',');
  import_bdd->add_option("--timeofday", bdd.timeofday, "Accepted timeofday values")->delimiter(',');
  import_bdd->add_option("--out", bdd.out, "Output manifest")->required();

  IngestCarlaArgs carla;
  auto* ingest = app.add_subcommand("ingest-carla", "Build a simulated manifest from exported frames");
  ingest->add_option("--frames", carla.frames, "Box export, one JSON frame per line")->required()->check(CLI::ExistingFile);
  ingest->add_option("--rgb-dir", carla.rgb_dir, "Directory of <frame_id>.png camera images")->required()->check(CLI::ExistingDirectory);
  ingest->add_option("--seg-dir", carla.seg_dir, "Directory of <frame_id>.png segmentation images")->required()->check(CLI::ExistingDirectory);
  ingest->add_option("--condition", carla.condition, "Rendered weather of these frames");
  ingest->add_option("--min-visible", carla.min_visible, "Visible-pixel share below which a box is dropped")
      ->check(CLI::Range(0.0, 1.0));
  ingest->add_option("--seg-channel", carla.seg_channel, "red or gray");
  ingest->add_option("--image-root", carla.image_root, "Image paths are stored relative to this");
  ingest->add_option("--append", carla.append, "Existing simulated manifest to extend")->check(CLI::ExistingFile);
  ingest->add_option("--out", carla.out, "Output manifest")->required();

  MaskBoxesArgs mask;
  auto* mask_cmd = app.add_subcommand("mask-boxes", "Add boxes derived from instance masks");
  mask_cmd->add_option("--manifest", mask.manifest)->required()->check(CLI::ExistingFile);
  mask_cmd->add_option("--masks", mask.masks, "Directory of <record_id>.png masks")->required()->check(CLI::ExistingDirectory);
  mask_cmd->add_option("--class-map", mask.class_map, "JSON {\"<mask id>\": \"<class>\"}")->required()->check(CLI::ExistingFile);
  mask_cmd->add_option("--connectivity", mask.connectivity, "4 or 8");
  mask_cmd->add_option("--min-area", mask.min_area, "Smallest component kept, in pixels")->check(CLI::PositiveNumber);
  mask_cmd->add_option("--seg-channel", mask.seg_channel, "gray or red");
  mask_cmd->add_option("--image-root", mask.image_root);
  mask_cmd->add_option("--out", mask.out)->required();

  RecipesArgs rec;
  auto* recipes_cmd = app.add_subcommand("recipes", "Print the built-in prompt recipes");
  recipes_cmd->add_option("--framework", rec.framework, "simulated or real_world")->required();
  recipes_cmd->add_option("--format", rec.format, "json or text");

  AugmentArgs aug;
  auto* augment = app.add_subcommand("augment", "Generate adverse-weather images");
  augment->require_subcommand(1);
  auto* augment_run = augment->add_subcommand("run", "Apply every recipe to each default-condition image");
  augment_run->add_option("--manifest", aug.manifest)->required()->check(CLI::ExistingFile);
  augment_run->add_option("--framework", aug.framework)->required();
  augment_run->add_option("--backend", aug.backend, "Editing server URL, or mock");
  augment_run->add_option("--seed", aug.seed);
  augment_run->add_option("--out", aug.out, "Output directory (manifest.json and images/)")->required();
  augment_run->add_option("--image-root", aug.image_root);
  augment_run->add_option("--recipes", aug.recipes, "Extra recipe files")->check(CLI::ExistingFile);
  augment_run->add_flag("--no-builtin", aug.no_builtin, "Use only recipes from --recipes");
  augment_run->add_option("--splits", aug.splits, "Only augment sources in these splits")->delimiter(',');
  augment_run->add_option("--max-retries", aug.max_retries)->check(CLI::NonNegativeNumber);

  ReviewArgs rv;
  auto* review = app.add_subcommand("review", "Human review of augmented images");
  review->require_subcommand(1);
  auto* serve = review->add_subcommand("serve", "Serve the review API (and UI assets)");
  auto* finalize = review->add_subcommand("finalize", "Write a manifest keeping reviewed-kept images");
  auto* decide = review->add_subcommand("decide", "Record one verdict");
  auto* progress = review->add_subcommand("progress", "Print review counts per condition");
  for (auto* sub : {serve, finalize, decide, progress}) {
    sub->add_option("--manifest", rv.manifest)->required()->check(CLI::ExistingFile);
    sub->add_option("--log", rv.log, "Decision log (JSON lines)")->required();
  }
  serve->add_option("--port", rv.port)->check(CLI::Range(0, 65535));
  serve->add_option("--host", rv.host);
  serve->add_option("--ui-dir", rv.ui_dir)->check(CLI::ExistingDirectory);
  serve->add_option("--image-root", rv.image_root);
  serve->add_option("--recipes", rv.recipes)->check(CLI::ExistingFile);
  finalize->add_option("--out", rv.out)->required();
  finalize->add_flag("--allow-pending", rv.allow_pending, "Drop images still pending instead of failing");
  decide->add_option("--image-id", rv.image_id)->required();
  decide->add_option("--verdict", rv.verdict, "kept | rejected_hallucination | rejected_unrealistic")->required();
  decide->add_option("--reviewer", rv.reviewer);

  ComposeArgs comp;
  auto* compose_cmd = app.add_subcommand("compose", "Assign train/val splits");
  compose_cmd->add_option("--manifest", comp.manifest)->required()->check(CLI::ExistingFile);
  compose_cmd->add_option("--mode", comp.mode, "basic or augmented");
  compose_cmd->add_option("--fractions", comp.fractions, "JSON {condition: fraction}")->check(CLI::ExistingFile);
  compose_cmd->add_option("--split", comp.split, "train,val fractions");
  compose_cmd->add_option("--train-size", comp.train_size);
  compose_cmd->add_option("--val-size", comp.val_size);
  compose_cmd->add_option("--seed", comp.seed);
  compose_cmd->add_option("--out", comp.out)->required();

  TestsetArgs ts;
  auto* testset = app.add_subcommand("testset", "Mark a per-condition test set");
  testset->add_option("--manifest", ts.manifest)->required()->check(CLI::ExistingFile);
  testset->add_option("--per-condition", ts.per_condition)->required();
  testset->add_option("--conditions", ts.conditions)->required()->delimiter(',');
  testset->add_option("--seed", ts.seed);
  testset->add_option("--out", ts.out)->required();

  EvaluateArgs ev;
  auto* evaluate = app.add_subcommand("evaluate", "Bootstrap mAP50 per condition");
  evaluate->add_option("--manifest", ev.manifest)->required()->check(CLI::ExistingFile);
  evaluate->add_option("--predictions", ev.predictions, "JSON lines of detections")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--bootstrap", ev.bootstrap, "Resamples")->check(CLI::PositiveNumber);
  evaluate->add_option("--seed", ev.seed);
  evaluate->add_option("--iou", ev.iou)->check(CLI::Range(0.0, 1.0));
  evaluate->add_option("--workers", ev.workers)->check(CLI::PositiveNumber);
  evaluate->add_option("--out", ev.out)->required();

  ReportArgs rp;
  auto* report = app.add_subcommand("report", "Render evaluation reports");
  report->add_option("--in", rp.inputs, "Report file, optionally name=path")->required();
  report->add_option("--format", rp.format, "table or csv");
  report->add_option("--out", rp.out);

  DiffusionArgs df;
  auto* demo = app.add_subcommand("diffusion-demo", "Monte Carlo vs closed-form forward marginals");
  demo->add_option("--betas", df.betas, "Comma-separated noise schedule");
  demo->add_option("--x0", df.x0);
  demo->add_option("--samples", df.samples);
  demo->add_option("--seed", df.seed);

  std::vector<std::string> args = input;
  try {
    // Locate the command before parsing so config values can be routed to it.
    const CLI::App* leaf = nullptr;
    std::optional<std::string> config_path;
    for (std::size_t i = 0; i < args.size(); ++i) {
      if (args[i] == "--config" && i + 1 < args.size()) config_path = args[i + 1];
      if (args[i].rfind("--config=", 0) == 0) config_path = args[i].substr(9);
      const CLI::App* parent = leaf ? leaf : &app;
      if (const CLI::App* sub = parent->get_subcommand_no_throw(args[i])) leaf = sub;
    }
    if (config_path) {
      if (!fs::exists(*config_path)) throw UsageError("config file not found: " + *config_path);
      inject_config(json::parse(read_text_file(*config_path)), app, leaf, args);
    }
    std::reverse(args.begin(), args.end());
    app.parse(std::move(args));
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << version_text() << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n";
    const CLI::App* focus = &app;
    for (const CLI::App* sub = &app; sub != nullptr;) {
      focus = sub;
      auto parsed = sub->get_subcommands();
      sub = parsed.empty() ? nullptr : parsed.front();
    }
    err << focus->help();
    return 2;
  } catch (const std::exception& e) {
    Logger(err, "").error("failed", {{"error_kind", error_kind(e)}, {"message", e.what()}});
    return 2;
  }

  std::string command_name;
  for (const CLI::App* sub = &app;;) {
    auto parsed = sub->get_subcommands();
    if (parsed.empty()) break;
    sub = parsed.front();
    command_name += (command_name.empty() ? "" : " ") + sub->get_name();
  }
  Logger log(err, command_name);

  try {
    if (import_bdd->parsed()) return cmd_import_bdd(bdd, out, log);
    if (ingest->parsed()) return cmd_ingest_carla(carla, out, log);
    if (mask_cmd->parsed()) return cmd_mask_boxes(mask, out, log);
    if (recipes_cmd->parsed()) return cmd_recipes(rec, out);
    if (augment_run->parsed()) return cmd_augment(aug, shared, out, log);
    if (serve->parsed()) return cmd_review_serve(rv, out, log);
    if (finalize->parsed()) return cmd_review_finalize(rv, out, log);
    if (decide->parsed()) return cmd_review_decide(rv, out, log);
    if (progress->parsed()) return cmd_review_progress(rv, out);
    if (compose_cmd->parsed()) return cmd_compose(comp, out, log);
    if (testset->parsed()) return cmd_testset(ts, out, log);
    if (evaluate->parsed()) return cmd_evaluate(ev, out, log);
    if (report->parsed()) return cmd_report(rp, out, log);
    if (demo->parsed()) return cmd_diffusion_demo(df, out, log);
  } catch (const UsageError& e) {
    log.error("failed", {{"error_kind", "usage"}, {"message", e.what()}});
    return 2;
  } catch (const std::exception& e) {
    log.error("failed", {{"error_kind", error_kind(e)}, {"message", e.what()}});
    return 1;
  }
  err << app.help();
  return 2;
}

}  // namespace wxaug::cli
