#pragma once

#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "wxaug/augment.hpp"
#include "wxaug/review.hpp"

namespace httplib {
class Server;
}

namespace wxaug {

/// HTTP front for a ReviewSession:
///   GET  /api/pairs/next?condition=<c>   pending pair, or 204 when none remain
///   GET  /api/pairs/<id>                 a specific pair with its current state
///   GET  /api/images/<id>                image bytes
///   POST /api/decisions                  {"image_id","verdict","reviewer"}
///   GET  /api/progress                   per-condition counts
/// Requests are serialised on one mutex, so log appends happen in arrival order.
class ReviewService {
 public:
  ReviewService(ReviewSession session, std::filesystem::path image_root,
                std::vector<Recipe> recipes = {});

  /// Registers the API routes and, when `ui_dir` is given, serves it at "/".
  void mount(httplib::Server& server, const std::optional<std::filesystem::path>& ui_dir = {});

  nlohmann::json pair_json(const ReviewPair& pair) const;
  nlohmann::json progress_json() const;

  /// Snapshot of the session's effective manifest.
  DatasetManifest effective_manifest() const;

 private:
  mutable std::mutex mutex_;
  ReviewSession session_;
  std::filesystem::path image_root_;
  std::vector<Recipe> recipes_;
};

nlohmann::json progress_to_json(const Progress& progress);

}  // namespace wxaug
