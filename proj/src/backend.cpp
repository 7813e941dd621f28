#include "wxaug/backend.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>

#include <httplib.h>

#include "wxaug/image.hpp"
#include "wxaug/seed.hpp"

namespace wxaug {

using nlohmann::json;

namespace {

bool mentions(const std::string& lowered, std::string_view keyword) {
  return lowered.find(keyword) != std::string::npos;
}

void blend(std::uint8_t* px, int channels, double toward, double alpha) {
  for (int c = 0; c < channels; ++c) {
    px[c] = static_cast<std::uint8_t>(std::lround(px[c] + alpha * (toward - px[c])));
  }
}

std::size_t scaled_count(const Image& img, double per_pixel, double guidance) {
  const double n = static_cast<double>(img.width) * img.height * per_pixel * std::max(guidance, 0.1);
  return std::max<std::size_t>(1, static_cast<std::size_t>(n));
}

void apply_fog(Image& img, double guidance) {
  const double alpha = std::clamp(0.2 * guidance, 0.0, 0.95);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) blend(img.at(x, y), img.channels, 255.0, alpha);
  }
}

void apply_rain_streaks(Image& img, double guidance, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> xs(0, img.width - 1);
  std::uniform_int_distribution<int> ys(0, img.height - 1);
  std::uniform_int_distribution<int> lengths(3, 8);
  const std::size_t count = scaled_count(img, 1.0 / 400.0, guidance);
  for (std::size_t i = 0; i < count; ++i) {
    int x = xs(rng);
    int y = ys(rng);
    const int len = lengths(rng);
    for (int k = 0; k < len && y + k < img.height; ++k) {
      const int sx = x + k / 3;
      if (sx >= img.width) break;
      blend(img.at(sx, y + k), img.channels, 200.0, 0.5);
    }
  }
}

void apply_raindrops(Image& img, double guidance, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> xs(0, img.width - 1);
  std::uniform_int_distribution<int> ys(0, img.height - 1);
  const std::size_t count = scaled_count(img, 1.0 / 900.0, guidance);
  for (std::size_t i = 0; i < count; ++i) {
    const int cx = xs(rng);
    const int cy = ys(rng);
    for (int dy = 0; dy < 2 && cy + dy < img.height; ++dy) {
      for (int dx = 0; dx < 2 && cx + dx < img.width; ++dx) {
        blend(img.at(cx + dx, cy + dy), img.channels, 230.0, 0.6);
      }
    }
  }
}

void apply_darkness(Image& img, double guidance) {
  const double factor = 1.0 / (1.0 + 0.5 * std::max(guidance, 0.0));
  for (auto& v : img.pixels) v = static_cast<std::uint8_t>(std::floor(v * factor));
}

void apply_snow(Image& img, double guidance, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> xs(0, img.width - 1);
  std::uniform_int_distribution<int> ys(0, img.height - 1);
  const std::size_t count = scaled_count(img, 1.0 / 150.0, guidance);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint8_t* px = img.at(xs(rng), ys(rng));
    std::fill(px, px + img.channels, std::uint8_t{255});
  }
}

void apply_hallucination(Image& img, std::mt19937_64& rng) {
  const int w = std::max(1, img.width / 3);
  const int h = std::max(1, img.height / 3);
  std::uniform_int_distribution<int> xs(0, img.width - w);
  std::uniform_int_distribution<int> ys(0, img.height - h);
  const int x0 = xs(rng);
  const int y0 = ys(rng);
  for (int y = y0; y < y0 + h; ++y) {
    for (int x = x0; x < x0 + w; ++x) std::fill(img.at(x, y), img.at(x, y) + img.channels, 0);
  }
}

std::vector<std::uint8_t> decode_b64_field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string()) {
    throw BackendError(std::string("missing or non-string field '") + key + "'", false);
  }
  try {
    return base64_decode(it->get_ref<const std::string&>());
  } catch (const std::exception& e) {
    throw BackendError(std::string("field '") + key + "': " + e.what(), false);
  }
}

}  // namespace

EditResponse MockBackend::edit(const EditRequest& request) {
  std::string lowered = request.prompt;
  std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });

  const bool hallucinate = mentions(lowered, "hallucinate");
  const bool fog = mentions(lowered, "fog");
  const bool raindrops = mentions(lowered, "raindrops");
  const bool rain = !raindrops && mentions(lowered, "rain");
  const bool dark = mentions(lowered, "night") || mentions(lowered, "darkness");
  const bool snow = mentions(lowered, "snow");

  Image img;
  try {
    img = decode_image(request.image_png);
  } catch (const ImageError& e) {
    throw BackendError(std::string("mock backend: ") + e.what(), false);
  }
  if (!(hallucinate || fog || raindrops || rain || dark || snow)) {
    return {request.image_png, "mock: no-op"};
  }

  std::mt19937_64 rng(derive_seed(request.seed, {"mock-backend", request.prompt}));
  std::string effects;
  auto note = [&effects](const char* name) {
    if (!effects.empty()) effects += ',';
    effects += name;
  };
  const double g = request.guidance_scale;
  if (hallucinate) apply_hallucination(img, rng), note("hallucinate");
  if (fog) apply_fog(img, g), note("fog");
  if (rain) apply_rain_streaks(img, g, rng), note("rain");
  if (raindrops) apply_raindrops(img, g, rng), note("raindrops");
  if (dark) apply_darkness(img, g), note("darkness");
  if (snow) apply_snow(img, g, rng), note("snow");
  return {encode_png(img), "mock: " + effects};
}

HttpBackend::HttpBackend(std::string base_url, std::chrono::seconds timeout)
    : base_url_(std::move(base_url)), timeout_(timeout) {
  while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
}

EditResponse HttpBackend::edit(const EditRequest& request) {
  httplib::Client client(base_url_);
  client.set_connection_timeout(std::chrono::seconds(10));
  client.set_read_timeout(timeout_);
  client.set_write_timeout(timeout_);
  auto res = client.Post("/v1/edit", to_json(request).dump(), "application/json");
  if (!res) {
    throw BackendError("transport error: " + httplib::to_string(res.error()), true);
  }
  if (res->status >= 500) {
    throw BackendError("backend returned " + std::to_string(res->status) + ": " + res->body, true);
  }
  if (res->status != 200) {
    throw BackendError("backend returned " + std::to_string(res->status) + ": " + res->body, false);
  }
  json body;
  try {
    body = json::parse(res->body);
  } catch (const json::parse_error& e) {
    throw BackendError(std::string("malformed response body: ") + e.what(), false);
  }
  return edit_response_from_json(body);
}

json to_json(const EditRequest& request) {
  return json{{"image_b64", base64_encode(request.image_png)},
              {"prompt", request.prompt},
              {"guidance_scale", request.guidance_scale},
              {"num_inference_steps", request.inference_steps},
              {"seed", request.seed}};
}

json to_json(const EditResponse& response) {
  return json{{"image_b64", base64_encode(response.image_png)},
              {"backend_info", response.backend_info}};
}

EditRequest edit_request_from_json(const json& j) {
  if (!j.is_object()) throw BackendError("request body must be an object", false);
  EditRequest r;
  r.image_png = decode_b64_field(j, "image_b64");
  auto prompt = j.find("prompt");
  auto scale = j.find("guidance_scale");
  auto steps = j.find("num_inference_steps");
  auto seed = j.find("seed");
  if (prompt == j.end() || !prompt->is_string()) throw BackendError("field 'prompt'", false);
  if (scale == j.end() || !scale->is_number()) throw BackendError("field 'guidance_scale'", false);
  if (steps == j.end() || !steps->is_number_integer()) {
    throw BackendError("field 'num_inference_steps'", false);
  }
  if (seed == j.end() || !seed->is_number_unsigned()) throw BackendError("field 'seed'", false);
  r.prompt = prompt->get<std::string>();
  r.guidance_scale = scale->get<double>();
  r.inference_steps = steps->get<int>();
  r.seed = seed->get<std::uint64_t>();
  return r;
}

EditResponse edit_response_from_json(const json& j) {
  if (!j.is_object()) throw BackendError("response body must be an object", false);
  EditResponse r;
  r.image_png = decode_b64_field(j, "image_b64");
  if (auto it = j.find("backend_info"); it != j.end() && it->is_string()) {
    r.backend_info = it->get<std::string>();
  }
  return r;
}

void mount_edit_endpoint(httplib::Server& server, EditBackend& backend) {
  server.Post("/v1/edit", [&backend](const httplib::Request& req, httplib::Response& res) {
    EditRequest request;
    try {
      request = edit_request_from_json(json::parse(req.body));
    } catch (const std::exception& e) {
      res.status = 400;
      res.set_content(json{{"error", e.what()}}.dump(), "application/json");
      return;
    }
    try {
      res.set_content(to_json(backend.edit(request)).dump(), "application/json");
    } catch (const BackendError& e) {
      res.status = e.retryable() ? 500 : 400;
      res.set_content(json{{"error", e.what()}}.dump(), "application/json");
    }
  });
}

}  // namespace wxaug
