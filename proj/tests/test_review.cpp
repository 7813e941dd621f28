#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <thread>

#include <json.hpp>

#include "local_server.hpp"
#include "support.hpp"
#include "wxaug/augment.hpp"
#include "wxaug/io.hpp"
#include "wxaug/review.hpp"
#include "wxaug/review_server.hpp"

using namespace wxaug;
using nlohmann::json;
using testsupport::augmented;
using testsupport::original;
using testsupport::TempDir;

namespace {

// Three sources, each augmented under rain/fog/night: 9 pending images.
DatasetManifest review_fixture() {
  DatasetManifest m;
  m.framework = Framework::kSimulated;
  for (const char* id : {"s2", "s0", "s1"}) {
    auto src = original(id);
    m.records.push_back(src);
    m.records.push_back(augmented(src, WeatherCondition::kRain, "sim-rain", ReviewState::kPending));
    m.records.push_back(augmented(src, WeatherCondition::kFog, "sim-fog", ReviewState::kPending));
    m.records.push_back(augmented(src, WeatherCondition::kNight, "sim-night", ReviewState::kPending));
  }
  return m;
}

std::vector<std::string> augmented_ids(const DatasetManifest& m) {
  std::vector<std::string> out;
  for (const auto& r : m.records) {
    if (r.is_augmented()) out.push_back(r.id);
  }
  std::sort(out.begin(), out.end());
  return out;
}

ReviewDecision decision(const std::string& id, Verdict v, const std::string& who = "ana",
                        int ms = 0) {
  return {id, v, who, Timestamp(std::chrono::milliseconds(1700000000000LL + ms))};
}

std::vector<ReviewDecision> random_log(const DatasetManifest& m, std::size_t n, unsigned seed) {
  std::mt19937 rng(seed);
  const auto ids = augmented_ids(m);
  std::vector<ReviewDecision> log;
  for (std::size_t i = 0; i < n; ++i) {
    log.push_back(decision(ids[rng() % ids.size()], static_cast<Verdict>(rng() % 3),
                           rng() % 2 ? "ana" : "ben", static_cast<int>(i)));
  }
  return log;
}

// Effective state of each id by folding over the log in order.
std::map<std::string, ReviewState> fold(const std::vector<ReviewDecision>& log) {
  std::map<std::string, ReviewState> out;
  for (const auto& d : log) out[d.image_id] = review_state_for(d.verdict);
  return out;
}

void write_log(const std::filesystem::path& path, const std::vector<ReviewDecision>& log) {
  std::string text;
  for (const auto& d : log) text += decision_to_line(d) + "\n";
  write_file(path, text);
}

}  // namespace

TEST_CASE("timestamps and log lines round-trip") {
  const auto d = decision("s0__sim-fog", Verdict::kRejectedUnrealistic, "ana", 123);
  CHECK(format_timestamp(d.timestamp) == "2023-11-14T22:13:20.123Z");
  CHECK(parse_timestamp(format_timestamp(d.timestamp)) == d.timestamp);
  CHECK_FALSE(parse_timestamp("2023-11-14 22:13:20").has_value());
  CHECK(decision_from_line(decision_to_line(d)) == d);
  CHECK_THROWS(decision_from_line(R"({"image_id": "x", "verdict": "maybe", "reviewer": "a", "timestamp": "2023-11-14T22:13:20.123Z"})"));
}

TEST_CASE("fresh session: everything pending, queue ordered by condition then source") {
  ReviewSession s(review_fixture());
  const auto p = s.progress();
  std::size_t total = 0;
  for (const auto& [c, cp] : p) {
    CHECK(cp.pending == 3);
    total += cp.total();
  }
  CHECK(total == 9);

  std::vector<std::string> order;
  ReviewSession walk(review_fixture());
  while (auto pair = walk.next_pending()) {
    order.push_back(pair->augmented.id);
    walk.record_decision(decision(pair->augmented.id, Verdict::kKept));
  }
  CHECK(order == std::vector<std::string>{"s0__sim-rain", "s1__sim-rain", "s2__sim-rain",
                                          "s0__sim-fog", "s1__sim-fog", "s2__sim-fog",
                                          "s0__sim-night", "s1__sim-night", "s2__sim-night"});
  CHECK_FALSE(walk.next_pending().has_value());
}

TEST_CASE("next pending with a condition filter returns the source pair") {
  auto m = review_fixture();
  ReviewSession s(m);
  auto pair = s.next_pending(WeatherCondition::kFog);
  REQUIRE(pair.has_value());
  CHECK(pair->augmented.id == "s0__sim-fog");
  CHECK(pair->original.id == "s0");
  CHECK(pair->original.annotations == pair->augmented.annotations);
  CHECK_FALSE(s.next_pending(WeatherCondition::kSnow).has_value());
}

TEST_CASE("decisions: transition, supersession, idempotence, errors") {
  ReviewSession s(review_fixture());
  CHECK(s.record_decision(decision("s0__sim-fog", Verdict::kKept)));
  CHECK(s.state_of("s0__sim-fog") == ReviewState::kKept);
  CHECK(s.record_decision(decision("s0__sim-fog", Verdict::kRejectedHallucination)));
  CHECK(s.state_of("s0__sim-fog") == ReviewState::kRejectedHallucination);
  CHECK_FALSE(s.record_decision(decision("s0__sim-fog", Verdict::kRejectedHallucination, "ana", 5)));
  CHECK(s.log().size() == 2);
  CHECK(s.record_decision(decision("s0__sim-fog", Verdict::kRejectedHallucination, "ben")));

  try {
    s.record_decision(decision("nope", Verdict::kKept));
    FAIL("expected an error");
  } catch (const ReviewError& e) {
    CHECK(e.kind() == ReviewError::Kind::kUnknownId);
  }
  try {
    s.record_decision(decision("s0", Verdict::kKept));
    FAIL("expected an error");
  } catch (const ReviewError& e) {
    CHECK(e.kind() == ReviewError::Kind::kNotAugmented);
  }
}

TEST_CASE("replaying a 50-entry log reconstructs the folded states") {
  TempDir dir;
  const auto m = review_fixture();
  const auto log = random_log(m, 50, 3);
  write_log(dir / "log.jsonl", log);
  auto session = ReviewSession::open(m, dir / "log.jsonl");
  const auto expected = fold(log);
  for (const auto& id : augmented_ids(m)) {
    auto it = expected.find(id);
    CHECK(session.state_of(id) == (it == expected.end() ? ReviewState::kPending : it->second));
  }
  CHECK(session.log().size() == 50);
  CHECK(read_log(dir / "log.jsonl") == log);
}

TEST_CASE("queue order survives a restart") {
  TempDir dir;
  const auto m = review_fixture();
  std::vector<std::string> first;
  {
    auto s = ReviewSession::open(m, dir / "log.jsonl");
    s.record_decision(decision("s1__sim-rain", Verdict::kKept));
    s.record_decision(decision("s0__sim-night", Verdict::kRejectedUnrealistic));
    ReviewSession copy(s.manifest(), s.log());
    while (auto p = copy.next_pending()) {
      first.push_back(p->augmented.id);
      copy.record_decision(decision(p->augmented.id, Verdict::kKept));
    }
  }
  auto restarted = ReviewSession::open(m, dir / "log.jsonl");
  std::vector<std::string> second;
  while (auto p = restarted.next_pending()) {
    second.push_back(p->augmented.id);
    restarted.record_decision(decision(p->augmented.id, Verdict::kKept));
  }
  CHECK(first == second);
  CHECK(first.size() == 7);
}

TEST_CASE("every byte prefix of the log opens as a valid session") {
  TempDir dir;
  const auto m = review_fixture();
  const auto log = random_log(m, 12, 8);
  std::string text;
  std::vector<std::size_t> line_ends;
  for (const auto& d : log) {
    text += decision_to_line(d) + "\n";
    line_ends.push_back(text.size());
  }
  for (std::size_t cut = 0; cut <= text.size(); ++cut) {
    write_file(dir / "log.jsonl", text.substr(0, cut));
    // Complete lines in the prefix; a final line missing only its newline still counts.
    std::size_t complete = 0;
    while (complete < line_ends.size() && line_ends[complete] - 1 <= cut) ++complete;
    auto s = ReviewSession::open(m, dir / "log.jsonl");
    REQUIRE(s.log().size() == complete);
    const auto expected = fold(std::vector<ReviewDecision>(log.begin(), log.begin() + complete));
    for (const auto& [id, state] : expected) CHECK(s.state_of(id) == state);
    const std::string after = read_text_file(dir / "log.jsonl");
    CHECK(after == text.substr(0, complete == 0 ? 0 : line_ends[complete - 1]));
  }
}

TEST_CASE("a malformed complete line is an error") {
  TempDir dir;
  const auto m = review_fixture();
  write_file(dir / "log.jsonl", decision_to_line(decision("s0__sim-fog", Verdict::kKept)) + "\n{oops}\n");
  try {
    ReviewSession::open(m, dir / "log.jsonl");
    FAIL("expected an error");
  } catch (const ReviewError& e) {
    CHECK(e.kind() == ReviewError::Kind::kBadLog);
  }
  write_file(dir / "log.jsonl", decision_to_line(decision("ghost", Verdict::kKept)) + "\n");
  CHECK_THROWS_AS(ReviewSession::open(m, dir / "log.jsonl"), ReviewError);
}

TEST_CASE("progress equals a brute-force scan") {
  const auto m = review_fixture();
  for (unsigned seed = 0; seed < 20; ++seed) {
    const auto log = random_log(m, 5 + seed, seed);
    ReviewSession s(m, log);
    const auto states = fold(log);
    std::map<WeatherCondition, std::array<std::size_t, 4>> scan;
    for (const auto& r : m.records) {
      if (!r.is_augmented()) continue;
      auto it = states.find(r.id);
      const ReviewState st = it == states.end() ? ReviewState::kPending : it->second;
      const int slot = st == ReviewState::kPending ? 0 : st == ReviewState::kKept ? 1
                       : st == ReviewState::kRejectedHallucination ? 2 : 3;
      ++scan[r.condition][slot];
    }
    for (const auto& [c, counts] : scan) {
      const auto& p = s.progress().at(c);
      CHECK(p.pending == counts[0]);
      CHECK(p.kept == counts[1]);
      CHECK(p.rejected_hallucination == counts[2]);
      CHECK(p.rejected_unrealistic == counts[3]);
    }
  }
}

TEST_CASE("finalize without augmented records is the identity") {
  DatasetManifest m;
  m.records = {original("a"), original("b")};
  m.splits = {{"a", Split::kTest}};
  auto r = finalize_filtered(m);
  CHECK(r.manifest == m);
}

TEST_CASE("finalize keeps originals and kept images only") {
  DatasetManifest m;
  m.framework = Framework::kRealWorld;
  const WeatherCondition conds[] = {WeatherCondition::kRain, WeatherCondition::kFog,
                                    WeatherCondition::kNight, WeatherCondition::kSnow,
                                    WeatherCondition::kRain};
  for (int i = 0; i < 5; ++i) {
    auto src = original("o" + std::to_string(i));
    m.records.push_back(src);
    m.records.push_back(augmented(src, conds[i], "r1", ReviewState::kPending));
    m.records.push_back(augmented(src, WeatherCondition::kFog, "r2", ReviewState::kPending));
  }
  m.splits = {{"o0", Split::kTest}, {"o1__r1", Split::kTest}, {"o2__r1", Split::kTest}};
  const auto ids = augmented_ids(m);
  std::vector<ReviewDecision> log;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    log.push_back(decision(ids[i], i < 7 ? Verdict::kKept
                                   : i == 7 ? Verdict::kRejectedHallucination
                                            : Verdict::kRejectedUnrealistic));
  }
  ReviewSession s(m, log);
  auto r = finalize_filtered(s.effective_manifest());
  CHECK(r.manifest.records.size() == 5 + 7);
  std::size_t kept = 0;
  for (const auto& [c, counts] : r.counts) kept += counts.kept;
  CHECK(kept == 7);
  for (const auto& rec : r.manifest.records) {
    if (rec.is_augmented()) CHECK(rec.review_state == ReviewState::kKept);
  }
  for (const auto& rec : m.records) {
    if (!rec.is_augmented()) CHECK(*r.manifest.find(rec.id) == rec);
  }
  // Log-derived per-condition kept counts.
  std::map<WeatherCondition, std::size_t> from_log;
  for (const auto& d : log) {
    if (d.verdict == Verdict::kKept) ++from_log[m.find(d.image_id)->condition];
  }
  for (const auto& [c, n] : from_log) CHECK(r.counts.at(c).kept == n);
  for (const auto& [id, split] : r.manifest.splits) CHECK(r.manifest.find(id) != nullptr);
  CHECK(validate_manifest(r.manifest).empty());
}

TEST_CASE("finalize refuses pending images unless allowed") {
  ReviewSession s(review_fixture(), {decision("s0__sim-fog", Verdict::kKept)});
  try {
    finalize_filtered(s.effective_manifest());
    FAIL("expected an error");
  } catch (const ReviewError& e) {
    CHECK(e.kind() == ReviewError::Kind::kPendingRemain);
  }
  auto r = finalize_filtered(s.effective_manifest(), true);
  CHECK(r.manifest.records.size() == 4);
  CHECK(r.counts.at(WeatherCondition::kFog).dropped_pending == 2);
}

// ---- HTTP API ---------------------------------------------------------------

namespace {

struct ApiFixture {
  TempDir dir;
  DatasetManifest manifest = review_fixture();
  std::unique_ptr<ReviewService> service;
  testsupport::LocalServer srv;

  explicit ApiFixture(bool with_ui = false) {
    for (const auto& r : manifest.records) {
      write_png(dir / r.image_path, testsupport::gradient_image(6, 4));
    }
    service = std::make_unique<ReviewService>(ReviewSession::open(manifest, dir / "log.jsonl"),
                                              dir.path(), builtin_recipes(Framework::kSimulated));
    std::optional<std::filesystem::path> ui;
    if (with_ui) {
      write_file(dir / "ui/index.html", std::string("<html>review</html>"));
      ui = dir / "ui";
    }
    service->mount(srv.server, ui);
    srv.start();
  }

  httplib::Result post(const json& body) {
    return srv.client().Post("/api/decisions", body.dump(), "application/json");
  }
};

}  // namespace

TEST_CASE("api: next pair, filter, and 204 when done") {
  ApiFixture api;
  auto cli = api.srv.client();
  auto res = cli.Get("/api/pairs/next?condition=fog");
  REQUIRE(res);
  CHECK(res->status == 200);
  auto j = json::parse(res->body);
  CHECK(j["image_id"] == "s0__sim-fog");
  CHECK(j["condition"] == "fog");
  CHECK(j["prompts"] == json::array({"Add dense fog to the image."}));
  CHECK(j["original"]["id"] == "s0");
  CHECK(j["original"]["image_url"] == "/api/images/s0");
  CHECK(j["augmented"]["annotations"].size() == 1);
  CHECK(j["review_state"] == "pending");

  CHECK(cli.Get("/api/pairs/next?condition=hail")->status == 400);
  CHECK(cli.Get("/api/pairs/next?condition=snow")->status == 204);
  CHECK(cli.Get("/api/pairs/s1__sim-night")->status == 200);
  CHECK(cli.Get("/api/pairs/s1")->status == 404);
}

TEST_CASE("api: decisions are validated, appended, and idempotent") {
  ApiFixture api;
  auto ok = api.post({{"image_id", "s0__sim-fog"}, {"verdict", "rejected_hallucination"}, {"reviewer", "ana"}});
  REQUIRE(ok);
  CHECK(ok->status == 200);
  auto j = json::parse(ok->body);
  CHECK(j["review_state"] == "rejected_hallucination");
  CHECK(j["appended"] == true);
  CHECK(json::parse(api.post({{"image_id", "s0__sim-fog"}, {"verdict", "rejected_hallucination"},
                              {"reviewer", "ana"}})->body)["appended"] == false);
  CHECK(read_log(api.dir / "log.jsonl").size() == 1);

  CHECK(api.post({{"image_id", "zzz"}, {"verdict", "kept"}, {"reviewer", "ana"}})->status == 404);
  CHECK(api.post({{"image_id", "s0"}, {"verdict", "kept"}, {"reviewer", "ana"}})->status == 422);
  CHECK(api.post({{"image_id", "s0__sim-fog"}, {"verdict", "fine"}, {"reviewer", "ana"}})->status == 400);
  CHECK(api.srv.client().Post("/api/decisions", "not json", "application/json")->status == 400);
  CHECK(read_log(api.dir / "log.jsonl").size() == 1);
}

TEST_CASE("api: images and progress") {
  ApiFixture api;
  auto cli = api.srv.client();
  auto img = cli.Get("/api/images/s2__sim-rain");
  REQUIRE(img);
  CHECK(img->status == 200);
  CHECK(img->get_header_value("Content-Type") == "image/png");
  CHECK(img->body == [&] {
    auto b = read_binary_file(api.dir / "aug/s2__sim-rain.png");
    return std::string(b.begin(), b.end());
  }());
  CHECK(cli.Get("/api/images/unknown")->status == 404);

  api.post({{"image_id", "s1__sim-rain"}, {"verdict", "kept"}, {"reviewer", "ana"}});
  auto p = json::parse(cli.Get("/api/progress")->body);
  CHECK(p["conditions"]["rain"]["kept"] == 1);
  CHECK(p["conditions"]["rain"]["pending"] == 2);
  CHECK(p["totals"]["total"] == 9);
  CHECK(p["totals"]["pending"] == 8);
}

TEST_CASE("api: concurrent reviewers each land one log line") {
  ApiFixture api;
  const auto ids = augmented_ids(api.manifest);
  std::vector<std::thread> threads;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    threads.emplace_back([&, i] {
      api.post({{"image_id", ids[i]}, {"verdict", i % 2 ? "kept" : "rejected_unrealistic"},
                {"reviewer", "r" + std::to_string(i)}});
    });
  }
  for (auto& t : threads) t.join();
  const auto log = read_log(api.dir / "log.jsonl");
  CHECK(log.size() == ids.size());
  CHECK(api.srv.client().Get("/api/pairs/next")->status == 204);
  auto eff = api.service->effective_manifest();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    CHECK(eff.find(ids[i])->review_state ==
          (i % 2 ? ReviewState::kKept : ReviewState::kRejectedUnrealistic));
  }
}

TEST_CASE("api: static ui assets") {
  ApiFixture api(true);
  auto res = api.srv.client().Get("/index.html");
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(res->body == "<html>review</html>");
}
