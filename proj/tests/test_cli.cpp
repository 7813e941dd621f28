#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include "pipeline.hpp"
#include "support.hpp"
#include "wxaug/io.hpp"
#include "wxaug/manifest.hpp"
#include "wxaug/review.hpp"

using namespace testsupport;
using nlohmann::json;

namespace {

bool has(const std::string& text, const std::string& needle) {
  return text.find(needle) != std::string::npos;
}

// Six default-condition originals with images on disk.
std::string small_dataset(const TempDir& dir) {
  wxaug::DatasetManifest m;
  for (int i = 0; i < 6; ++i) {
    auto r = original("img" + std::to_string(i));
    wxaug::write_png(dir / r.image_path, gradient_image(16, 12, i + 1));
    m.records.push_back(r);
  }
  const auto path = (dir / "dataset.json").string();
  wxaug::save_manifest(m, path);
  return path;
}

std::vector<json> log_lines(const std::string& err) {
  std::vector<json> out;
  std::istringstream in(err);
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line[0] == '{') out.push_back(json::parse(line));
  }
  return out;
}

}  // namespace

TEST_CASE("usage, version, and unknown commands") {
  auto none = run_cli({});
  CHECK(none.code == 2);
  CHECK(has(none.err, "subcommand"));
  auto version = run_cli({"--version"});
  CHECK(version.code == 0);
  CHECK(has(version.out, "wxaug 0.1.0"));
  CHECK(run_cli({"frobnicate"}).code == 2);
  auto help = run_cli({"compose", "--help"});
  CHECK(help.code == 0);
  CHECK(has(help.out, "--fractions"));
  CHECK(run_cli({"compose", "--manifest", "/nonexistent.json", "--out", "x.json"}).code == 2);
}

TEST_CASE("recipes command") {
  auto r = run_cli({"recipes", "--framework", "simulated"});
  REQUIRE(r.code == 0);
  const auto j = json::parse(r.out);
  CHECK(j.size() == 3);
  auto text = run_cli({"recipes", "--framework", "real_world", "--format", "text"});
  CHECK(text.code == 0);
  CHECK(has(text.out, "snow"));
  CHECK(run_cli({"recipes", "--framework", "carla"}).code == 2);
}

TEST_CASE("sampling commands demand a seed and log it") {
  TempDir dir;
  const auto manifest = small_dataset(dir);
  auto missing = run_cli({"testset", "--manifest", manifest, "--per-condition", "2", "--conditions",
                          "default", "--out", (dir / "t.json").string()});
  CHECK(missing.code == 2);
  CHECK(has(missing.err, "--seed"));
  CHECK_FALSE(std::filesystem::exists(dir / "t.json"));

  auto ok = run_cli({"testset", "--manifest", manifest, "--per-condition", "2", "--conditions",
                     "default", "--seed", "8", "--out", (dir / "t.json").string()});
  CHECK(ok.code == 0);
  bool logged = false;
  for (const auto& line : log_lines(ok.err)) {
    if (line.value("event", "") == "seed") logged = line["effective_seed"] == 8;
  }
  CHECK(logged);
}

TEST_CASE("config values fill in options; flags win; subcommand sections win") {
  TempDir dir;
  const auto manifest = small_dataset(dir);
  // `pre` goes before the subcommand (root options), `post` after it.
  auto testset = [&](const std::string& out, std::vector<std::string> pre, std::vector<std::string> post) {
    std::vector<std::string> args = pre;
    args.push_back("testset");
    args.insert(args.end(), post.begin(), post.end());
    for (std::string a : {"--manifest", manifest.c_str(), "--conditions", "default", "--out"}) args.push_back(a);
    args.push_back((dir / out).string());
    auto r = run_cli(args);
    INFO(r.err);
    REQUIRE(r.code == 0);
    return wxaug::read_text_file(dir / out);
  };
  wxaug::write_file(dir / "cfg.json", std::string(R"({"seed": 1, "testset": {"seed": 3, "per_condition": 2}})"));
  const std::vector<std::string> cfg{"--config", (dir / "cfg.json").string()};
  const auto from_config = testset("a.json", cfg, {});
  CHECK(from_config == testset("b.json", {}, {"--per-condition", "2", "--seed", "3"}));
  const auto flagged = testset("c.json", cfg, {"--seed", "4"});
  CHECK(flagged == testset("d.json", {}, {"--per-condition", "2", "--seed", "4"}));
  CHECK(from_config != flagged);

  wxaug::write_file(dir / "nested.json",
                    std::string(R"({"review": {"reviewer": "outer"}, "decide": {"reviewer": "inner"}})"));
  wxaug::DatasetManifest m = wxaug::load_manifest(manifest);
  m.records.push_back(augmented(m.records[0], wxaug::WeatherCondition::kFog, "sim-fog",
                                wxaug::ReviewState::kPending));
  wxaug::save_manifest(m, (dir / "aug.json").string());
  auto d = run_cli({"--config", (dir / "nested.json").string(), "review", "decide", "--manifest",
                    (dir / "aug.json").string(), "--log", (dir / "log.jsonl").string(), "--image-id",
                    "img0__sim-fog", "--verdict", "kept"});
  REQUIRE(d.code == 0);
  CHECK(wxaug::read_log(dir / "log.jsonl").at(0).reviewer == "inner");

  CHECK(run_cli({"--config", (dir / "missing.json").string(), "recipes", "--framework", "simulated"}).code == 2);
}

TEST_CASE("outputs never overwrite inputs") {
  TempDir dir;
  const auto manifest = small_dataset(dir);
  const auto before = wxaug::read_text_file(manifest);
  auto r = run_cli({"testset", "--manifest", manifest, "--per-condition", "1", "--conditions",
                    "default", "--seed", "1", "--out", manifest});
  CHECK(r.code == 2);
  CHECK(has(r.err, "overwrite"));
  CHECK(wxaug::read_text_file(manifest) == before);
}

TEST_CASE("runtime failures exit 1 with a classified log line") {
  TempDir dir;
  const auto manifest = small_dataset(dir);
  auto r = run_cli({"testset", "--manifest", manifest, "--per-condition", "7", "--conditions",
                    "default", "--seed", "1", "--out", (dir / "t.json").string()});
  CHECK(r.code == 1);
  const auto lines = log_lines(r.err);
  REQUIRE_FALSE(lines.empty());
  CHECK(lines.back()["level"] == "error");
  CHECK(lines.back().contains("error_kind"));
  CHECK(has(lines.back()["message"].get<std::string>(), "need 7"));
}

TEST_CASE("augment reports per-image failures and still writes the rest") {
  TempDir dir;
  const auto manifest = small_dataset(dir);
  std::filesystem::remove(dir / "images/img2.png");
  auto r = run_cli({"augment", "run", "--manifest", manifest, "--framework", "simulated", "--backend",
                    "mock", "--seed", "1", "--image-root", dir.path().string(), "--out",
                    (dir / "aug").string()});
  CHECK(r.code == 1);
  const auto out = wxaug::load_manifest((dir / "aug/manifest.json").string());
  CHECK(out.records.size() == 6 + 15);
  CHECK(run_cli({"augment", "run", "--manifest", manifest, "--framework", "real_world", "--seed", "1",
                 "--out", (dir / "aug2").string()})
            .code == 2);
}

TEST_CASE("review progress and finalize through the CLI") {
  TempDir dir;
  const auto manifest = small_dataset(dir);
  REQUIRE(run_cli({"augment", "run", "--manifest", manifest, "--framework", "simulated", "--seed", "2",
                   "--image-root", dir.path().string(), "--out", (dir / "aug").string()})
              .code == 0);
  const auto aug = (dir / "aug/manifest.json").string();
  const auto log = (dir / "log.jsonl").string();
  auto d = run_cli({"review", "decide", "--manifest", aug, "--log", log, "--image-id", "img0__sim-fog",
                    "--verdict", "rejected_hallucination"});
  REQUIRE(d.code == 0);
  CHECK(json::parse(d.out)["appended"] == true);
  auto p = run_cli({"review", "progress", "--manifest", aug, "--log", log});
  REQUIRE(p.code == 0);
  const auto j = json::parse(p.out);
  CHECK(j["conditions"]["fog"]["rejected_hallucination"] == 1);
  CHECK(j["totals"]["pending"] == 17);

  CHECK(run_cli({"review", "finalize", "--manifest", aug, "--log", log, "--out",
                 (dir / "f.json").string()}).code == 1);
  auto f = run_cli({"review", "finalize", "--manifest", aug, "--log", log, "--allow-pending", "--out",
                    (dir / "f.json").string()});
  REQUIRE(f.code == 0);
  CHECK(wxaug::load_manifest((dir / "f.json").string()).records.size() == 6);
  CHECK(run_cli({"review", "decide", "--manifest", aug, "--log", log, "--image-id", "img0",
                 "--verdict", "kept"}).code == 1);
}

TEST_CASE("diffusion demo prints one row per step") {
  auto r = run_cli({"diffusion-demo", "--betas", "0.1,0.2,0.3", "--samples", "1000", "--seed", "1"});
  REQUIRE(r.code == 0);
  CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 4);
  CHECK(run_cli({"diffusion-demo", "--betas", "0.1,1.5", "--seed", "1"}).code != 0);
}

TEST_CASE("end-to-end pipeline") {
  TempDir dir;
  const auto run = run_pipeline(dir);
  CHECK(run.hallucination_rejections == 6);
  CHECK(run.augmented_kept == 17);
  CHECK(has(run.report_table, "Weather Condition"));
  CHECK(has(run.report_table, " ± "));
  for (const char* row : {"Default", "Rain", "Fog", "Night"}) CHECK(has(run.report_table, row));
  const auto composed = wxaug::parse_manifest(run.composed_manifest);
  CHECK(wxaug::validate_manifest(composed).empty());
  for (const auto& r : composed.records) {
    CHECK(r.recipe_id != std::optional<std::string>("sim-fog-bad"));
  }
}

TEST_CASE("pipeline outputs are byte-identical across runs and worker counts") {
  TempDir a, b;
  const auto one = run_pipeline(a, 1);
  const auto four = run_pipeline(b, 4);
  CHECK(one.report_json == four.report_json);
  CHECK(one.composed_manifest == four.composed_manifest);
  CHECK(one.report_table == four.report_table);
}
