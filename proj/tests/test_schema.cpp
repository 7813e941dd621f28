#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>

#include "support.hpp"
#include "wxaug/bdd100k.hpp"
#include "wxaug/manifest.hpp"

using namespace wxaug;
using testsupport::augmented;
using testsupport::original;

namespace {

DatasetManifest five_record_fixture() {
  DatasetManifest m;
  m.framework = Framework::kRealWorld;
  auto a = original("a");
  auto b = original("b");
  b.annotations.push_back({{2, 3, 40.5, 60}, ObjectClass::kWalker});
  auto c = original("c", WeatherCondition::kSnow);
  c.provenance = Provenance::kCaptured;
  m.records = {a, b, c, augmented(a, WeatherCondition::kFog, "real-fog", ReviewState::kPending),
               augmented(b, WeatherCondition::kSnow, "real-snow", ReviewState::kRejectedUnrealistic)};
  m.splits = {{"a", Split::kTrain}, {"c", Split::kTest}};
  return m;
}

bool has_violation(const DatasetManifest& m, const std::string& field) {
  auto v = validate_manifest(m);
  return std::any_of(v.begin(), v.end(), [&](const Violation& x) { return x.field == field; });
}

}  // namespace

TEST_CASE("tag names round-trip") {
  for (auto c : kAllConditions) CHECK(parse_condition(to_string(c)) == c);
  for (auto c : kAllClasses) CHECK(parse_class(to_string(c)) == c);
  CHECK(kAllConditions.size() == 5);
  CHECK(kNumClasses == 4);
  CHECK_FALSE(parse_condition("hail").has_value());
  CHECK_FALSE(parse_class("cyclist").has_value());
  CHECK(to_string(ReviewState::kRejectedHallucination) == "rejected_hallucination");
}

TEST_CASE("snow exists only in the real-world framework") {
  CHECK_FALSE(condition_allowed(Framework::kSimulated, WeatherCondition::kSnow));
  CHECK(condition_allowed(Framework::kRealWorld, WeatherCondition::kSnow));
  for (auto c : {WeatherCondition::kDefault, WeatherCondition::kRain, WeatherCondition::kFog,
                 WeatherCondition::kNight}) {
    CHECK(condition_allowed(Framework::kSimulated, c));
  }
}

TEST_CASE("bbox validity") {
  CHECK(BBox{0, 0, 1, 1}.valid());
  CHECK_FALSE(BBox{0, 0, 0, 1}.valid());
  CHECK_FALSE(BBox{2, 0, 1, 1}.valid());
  CHECK_FALSE(BBox{-1, 0, 1, 1}.valid());
  CHECK_FALSE(BBox{0, 0, std::numeric_limits<double>::infinity(), 1}.valid());
  CHECK_FALSE(BBox{0, 0, std::nan(""), 1}.valid());
}

TEST_CASE("empty document parses to an empty manifest") {
  auto m = parse_manifest(R"({"framework": "simulated", "records": []})");
  CHECK(m.records.empty());
  CHECK(m.splits.empty());
  CHECK(serialize_manifest(m) == "{\n  \"framework\": \"simulated\",\n  \"records\": [],\n  \"splits\": {}\n}\n");
}

TEST_CASE("duplicate ids are a semantic error naming the id") {
  const char* doc = R"({"framework": "simulated", "records": [
    {"id": "a", "image": "a.png", "condition": "default", "provenance": "rendered",
     "review_state": "not_applicable", "annotations": []},
    {"id": "a", "image": "b.png", "condition": "default", "provenance": "rendered",
     "review_state": "not_applicable", "annotations": []}]})";
  try {
    parse_manifest(doc);
    FAIL("expected an error");
  } catch (const ManifestError& e) {
    CHECK(e.kind() == ManifestError::Kind::kSemantic);
    CHECK(e.record_id() == "a");
    CHECK(e.field() == "id");
  }
}

TEST_CASE("malformed json is a syntax error") {
  try {
    parse_manifest("{\"framework\": ");
    FAIL("expected an error");
  } catch (const ManifestError& e) {
    CHECK(e.kind() == ManifestError::Kind::kSyntax);
  }
  CHECK_THROWS_AS(parse_manifest(R"({"framework": "mars", "records": []})"), ManifestError);
  CHECK_THROWS_AS(parse_manifest(R"({"framework": "simulated"})"), ManifestError);
}

TEST_CASE("round trip of the five-record fixture") {
  auto m = five_record_fixture();
  REQUIRE(validate_manifest(m).empty());
  const std::string text = serialize_manifest(m);
  auto back = parse_manifest(text);
  CHECK(structurally_equal(back, m));
  CHECK(serialize_manifest(back) == text);
  CHECK(serialize_manifest(m) == text);
}

TEST_CASE("record order does not change the bytes") {
  auto m = five_record_fixture();
  const std::string reference = serialize_manifest(m);
  std::mt19937 rng(7);
  for (int i = 0; i < 20; ++i) {
    std::shuffle(m.records.begin(), m.records.end(), rng);
    CHECK(serialize_manifest(m) == reference);
  }
}

TEST_CASE("invariant violations") {
  SUBCASE("snow in simulated") {
    DatasetManifest m;
    m.records = {original("a", WeatherCondition::kSnow)};
    CHECK(has_violation(m, "condition"));
  }
  SUBCASE("dangling source") {
    DatasetManifest m;
    auto a = original("a");
    m.records = {augmented(a, WeatherCondition::kFog, "sim-fog")};
    CHECK(has_violation(m, "source_id"));
  }
  SUBCASE("augmented without review state") {
    DatasetManifest m;
    auto a = original("a");
    auto b = augmented(a, WeatherCondition::kFog, "sim-fog");
    b.review_state = ReviewState::kNotApplicable;
    m.records = {a, b};
    CHECK(has_violation(m, "review_state"));
  }
  SUBCASE("captured with a review state") {
    DatasetManifest m;
    auto a = original("a");
    a.review_state = ReviewState::kKept;
    m.records = {a};
    CHECK(has_violation(m, "review_state"));
  }
  SUBCASE("augmented geometry differs from source") {
    DatasetManifest m;
    auto a = original("a");
    auto b = augmented(a, WeatherCondition::kFog, "sim-fog");
    b.annotations.clear();
    m.records = {a, b};
    CHECK(has_violation(m, "annotations"));
  }
  SUBCASE("bad box") {
    DatasetManifest m;
    auto a = original("a");
    a.annotations[0].bbox = {5, 5, 5, 9};
    m.records = {a};
    CHECK_FALSE(validate_manifest(m).empty());
  }
  SUBCASE("split for unknown record") {
    DatasetManifest m;
    m.records = {original("a")};
    m.splits["zzz"] = Split::kTrain;
    CHECK(has_violation(m, "splits"));
  }
  SUBCASE("absolute image path") {
    DatasetManifest m;
    auto a = original("a");
    a.image_path = "/etc/a.png";
    m.records = {a};
    CHECK_FALSE(validate_manifest(m).empty());
  }
}

TEST_CASE("predictions parse with line numbers") {
  const std::string good =
      R"({"image_id": "a", "class": "vehicle", "bbox": [0, 0, 4, 4], "confidence": 0.9})" "\n\n"
      R"({"image_id": "b", "class": "walker", "bbox": [1, 1, 2, 3], "confidence": 0.1})" "\n";
  auto lines = parse_predictions(good);
  REQUIRE(lines.size() == 2);
  CHECK(lines[1].prediction.cls == ObjectClass::kWalker);
  CHECK(parse_predictions(serialize_predictions(lines)).size() == 2);

  try {
    parse_predictions(good + R"({"image_id": "c", "class": "vehicle", "bbox": [0, 0, 4, 4], "confidence": 1.5})");
    FAIL("expected an error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("line 4") != std::string::npos);
  }
}

TEST_CASE("bdd category mapping") {
  CHECK(map_bdd_category("person") == ObjectClass::kWalker);
  for (auto c : {"car", "bus", "truck", "motorcycle", "bicycle", "train"}) {
    CHECK(map_bdd_category(c) == ObjectClass::kVehicle);
  }
  CHECK(map_bdd_category("traffic sign") == ObjectClass::kTrafficSign);
  CHECK(map_bdd_category("traffic light") == ObjectClass::kTrafficLight);
  CHECK_FALSE(map_bdd_category("rider").has_value());
  CHECK_FALSE(map_bdd_category("lane").has_value());
}

namespace {

std::string bdd_entry(const std::string& name, const std::string& weather,
                      const std::string& tod, const std::string& labels = "[]") {
  return R"({"name": ")" + name + R"(", "attributes": {"weather": ")" + weather +
         R"(", "timeofday": ")" + tod + R"(", "scene": "city street"}, "labels": )" + labels + "}";
}

}  // namespace

TEST_CASE("bdd single clear-day car") {
  const std::string doc = "[" + bdd_entry("0001.jpg", "clear", "daytime",
      R"([{"category": "car", "box2d": {"x1": 10, "y1": 20, "x2": 30, "y2": 40}}])") + "]";
  auto r = import_bdd100k(doc, "bdd/images");
  REQUIRE(r.manifest.records.size() == 1);
  const auto& rec = r.manifest.records[0];
  CHECK(rec.id == "0001");
  CHECK(rec.image_path == "bdd/images/0001.jpg");
  CHECK(rec.condition == WeatherCondition::kDefault);
  CHECK(rec.provenance == Provenance::kCaptured);
  CHECK(r.manifest.framework == Framework::kRealWorld);
  REQUIRE(rec.annotations.size() == 1);
  CHECK(rec.annotations[0].cls == ObjectClass::kVehicle);
  CHECK(rec.annotations[0].bbox == BBox{10, 20, 30, 40});
}

TEST_CASE("bdd rainy entry is excluded") {
  auto r = import_bdd100k("[" + bdd_entry("x.jpg", "rainy", "daytime") + "]", "");
  CHECK(r.manifest.records.empty());
  CHECK(r.excluded == 1);
}

TEST_CASE("bdd ten-entry fixture keeps the six clear-day entries") {
  std::vector<std::string> entries;
  for (int i = 0; i < 6; ++i) {
    entries.push_back(bdd_entry("clear" + std::to_string(i) + ".jpg", "clear", "daytime",
        R"([{"category": "person", "box2d": {"x1": 1, "y1": 1, "x2": 5, "y2": 9}},
            {"category": "drivable area", "poly2d": []},
            {"category": "rider", "box2d": {"x1": 1, "y1": 1, "x2": 5, "y2": 9}}])"));
  }
  entries.push_back(bdd_entry("n.jpg", "clear", "night"));
  entries.push_back(bdd_entry("f.jpg", "foggy", "daytime"));
  entries.push_back(bdd_entry("s.jpg", "snowy", "dawn/dusk"));
  entries.push_back(bdd_entry("w.jpg", "windy", "daytime"));  // not a BDD weather value
  std::string doc = "[";
  for (std::size_t i = 0; i < entries.size(); ++i) doc += (i ? "," : "") + entries[i];
  doc += "]";

  auto r = import_bdd100k(doc, "");
  CHECK(r.entries == 10);
  CHECK(r.manifest.records.size() == 6);
  CHECK(r.excluded == 3);
  CHECK(r.unknown_weather_skipped == 1);
  CHECK(r.unmapped_labels == 6);
  for (const auto& rec : r.manifest.records) CHECK(rec.annotations.size() == 1);
}

TEST_CASE("bdd entry without mappable labels is still imported") {
  auto r = import_bdd100k("[" + bdd_entry("e.jpg", "clear", "daytime",
      R"([{"category": "lane", "poly2d": []}])") + "]", "");
  REQUIRE(r.manifest.records.size() == 1);
  CHECK(r.manifest.records[0].annotations.empty());
}

TEST_CASE("bdd filter is configurable") {
  BddFilter f;
  f.weather = {"clear", "overcast"};
  f.timeofday = {"daytime", "dawn/dusk"};
  const std::string doc = "[" + bdd_entry("a.jpg", "overcast", "dawn/dusk") + "," +
                          bdd_entry("b.jpg", "clear", "night") + "]";
  CHECK(import_bdd100k(doc, "", f).manifest.records.size() == 1);
}

TEST_CASE("bdd malformed entry names its index") {
  const std::string doc = "[" + bdd_entry("a.jpg", "clear", "daytime") + R"(, {"name": 3}])";
  try {
    import_bdd100k(doc, "");
    FAIL("expected an error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("entry 1") != std::string::npos);
  }
}
