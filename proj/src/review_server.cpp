#include "wxaug/review_server.hpp"

#include <httplib.h>

#include "wxaug/io.hpp"
#include "wxaug/json_codec.hpp"

namespace wxaug {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json; charset=utf-8");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, json{{"error", message}});
}

std::string content_type_for(const fs::path& path) {
  std::string ext = path.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  return "image/png";
}

json image_json(const ImageRecord& r) {
  json anns = json::array();
  for (const auto& a : r.annotations) anns.push_back(codec::annotation_to_json(a));
  return json{{"id", r.id}, {"image_url", "/api/images/" + r.id}, {"annotations", std::move(anns)}};
}

json counts_json(const ConditionProgress& p) {
  return json{{"pending", p.pending},
              {"kept", p.kept},
              {"rejected_hallucination", p.rejected_hallucination},
              {"rejected_unrealistic", p.rejected_unrealistic},
              {"total", p.total()}};
}

}  // namespace

json progress_to_json(const Progress& progress) {
  json conditions = json::object();
  ConditionProgress totals;
  for (const auto& [condition, p] : progress) {
    conditions[std::string(to_string(condition))] = counts_json(p);
    totals.pending += p.pending;
    totals.kept += p.kept;
    totals.rejected_hallucination += p.rejected_hallucination;
    totals.rejected_unrealistic += p.rejected_unrealistic;
  }
  return json{{"conditions", std::move(conditions)}, {"totals", counts_json(totals)}};
}

ReviewService::ReviewService(ReviewSession session, fs::path image_root, std::vector<Recipe> recipes)
    : session_(std::move(session)), image_root_(std::move(image_root)), recipes_(std::move(recipes)) {}

json ReviewService::pair_json(const ReviewPair& pair) const {
  json prompts = json::array();
  if (pair.augmented.recipe_id) {
    for (const auto& r : recipes_) {
      if (r.id != *pair.augmented.recipe_id) continue;
      for (const auto& s : r.steps) prompts.push_back(s.prompt);
    }
  }
  return json{{"image_id", pair.augmented.id},
              {"condition", to_string(pair.augmented.condition)},
              {"recipe_id", pair.augmented.recipe_id.value_or("")},
              {"prompts", std::move(prompts)},
              {"review_state", to_string(pair.augmented.review_state)},
              {"original", image_json(pair.original)},
              {"augmented", image_json(pair.augmented)}};
}

json ReviewService::progress_json() const {
  std::lock_guard lock(mutex_);
  return progress_to_json(session_.progress());
}

DatasetManifest ReviewService::effective_manifest() const {
  std::lock_guard lock(mutex_);
  return session_.effective_manifest();
}

void ReviewService::mount(httplib::Server& server, const std::optional<fs::path>& ui_dir) {
  server.Get("/api/pairs/next", [this](const httplib::Request& req, httplib::Response& res) {
    std::optional<WeatherCondition> filter;
    if (req.has_param("condition") && !req.get_param_value("condition").empty()) {
      filter = parse_condition(req.get_param_value("condition"));
      if (!filter) return send_error(res, 400, "unknown condition");
    }
    std::lock_guard lock(mutex_);
    auto pair = session_.next_pending(filter);
    if (!pair) {
      res.status = 204;
      return;
    }
    send_json(res, 200, pair_json(*pair));
  });

  server.Get(R"(/api/pairs/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    std::lock_guard lock(mutex_);
    auto pair = session_.pair(req.matches[1].str());
    if (!pair) return send_error(res, 404, "no augmented image with that id");
    send_json(res, 200, pair_json(*pair));
  });

  server.Get(R"(/api/images/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    fs::path path;
    {
      std::lock_guard lock(mutex_);
      const ImageRecord* r = session_.manifest().find(req.matches[1].str());
      if (!r) return send_error(res, 404, "unknown image id");
      path = image_root_ / r->image_path;
    }
    try {
      auto bytes = read_binary_file(path);
      res.set_content(std::string(bytes.begin(), bytes.end()), content_type_for(path));
    } catch (const std::exception& e) {
      send_error(res, 404, e.what());
    }
  });

  server.Post("/api/decisions", [this](const httplib::Request& req, httplib::Response& res) {
    ReviewDecision decision;
    try {
      json body = json::parse(req.body);
      decision.image_id = codec::string_field(body, "image_id");
      decision.verdict = codec::enum_field(body, "verdict", parse_verdict);
      decision.reviewer = codec::string_field(body, "reviewer");
    } catch (const std::exception& e) {
      return send_error(res, 400, std::string("malformed decision: ") + e.what());
    }
    decision.timestamp = now_utc();
    std::lock_guard lock(mutex_);
    try {
      const bool appended = session_.record_decision(decision);
      send_json(res, 200, json{{"image_id", decision.image_id},
                               {"review_state", to_string(session_.state_of(decision.image_id))},
                               {"appended", appended}});
    } catch (const ReviewError& e) {
      send_error(res, e.kind() == ReviewError::Kind::kUnknownId ? 404 : 422, e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, e.what());
    }
  });

  server.Get("/api/progress", [this](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, progress_json());
  });

  if (ui_dir) server.set_mount_point("/", ui_dir->string());
}

}  // namespace wxaug
