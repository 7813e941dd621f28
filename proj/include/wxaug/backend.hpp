#pragma once

#include <chrono>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace httplib {
class Server;
}

namespace wxaug {

struct EditRequest {
  std::vector<std::uint8_t> image_png;
  std::string prompt;
  double guidance_scale = 1.0;
  int inference_steps = 1;
  std::uint64_t seed = 0;
};

struct EditResponse {
  std::vector<std::uint8_t> image_png;
  std::string backend_info;
};

class BackendError : public std::runtime_error {
 public:
  BackendError(const std::string& message, bool retryable)
      : std::runtime_error(message), retryable_(retryable) {}
  bool retryable() const { return retryable_; }

 private:
  bool retryable_;
};

/// An image editor driven by text instructions. Implementations must be safe to
/// call from several threads at once.
class EditBackend {
 public:
  virtual ~EditBackend() = default;
  virtual EditResponse edit(const EditRequest& request) = 0;
};

/// Deterministic stand-in for the diffusion editor. Recognised keywords (case-insensitive):
///   fog                    blend toward white, strength grows with guidance_scale
///   rain / raindrops       seeded streaks / droplets
///   night / darkness       scale every channel down
///   snow                   seeded white dots
///   hallucinate            black out a seeded rectangle
/// Any other prompt returns the request bytes untouched.
class MockBackend final : public EditBackend {
 public:
  EditResponse edit(const EditRequest& request) override;
};

/// Client for POST {base_url}/v1/edit.
class HttpBackend final : public EditBackend {
 public:
  explicit HttpBackend(std::string base_url,
                       std::chrono::seconds timeout = std::chrono::seconds(600));
  EditResponse edit(const EditRequest& request) override;

 private:
  std::string base_url_;
  std::chrono::seconds timeout_;
};

// Wire format: {"image_b64","prompt","guidance_scale","num_inference_steps","seed"}
// and {"image_b64","backend_info"}.
nlohmann::json to_json(const EditRequest& request);
nlohmann::json to_json(const EditResponse& response);
/// Throw BackendError (non-retryable) on missing or mistyped fields.
EditRequest edit_request_from_json(const nlohmann::json& j);
EditResponse edit_response_from_json(const nlohmann::json& j);

/// Registers POST /v1/edit on `server`, answering with `backend`. Malformed bodies get
/// 400; backend failures 500 (retryable) or 400.
void mount_edit_endpoint(httplib::Server& server, EditBackend& backend);

}  // namespace wxaug
