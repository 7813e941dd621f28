#pragma once

#include <atomic>
#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>

#include "wxaug/image.hpp"
#include "wxaug/manifest.hpp"

namespace testsupport {

namespace fs = std::filesystem;

// Removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("wxaug-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline wxaug::Image gradient_image(int w, int h, unsigned seed = 1) {
  wxaug::Image img(w, h, 3);
  std::mt19937 rng(seed);
  const int base = static_cast<int>(rng() % 64);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      auto* p = img.at(x, y);
      p[0] = static_cast<std::uint8_t>(base + (x * 160) / std::max(1, w));
      p[1] = static_cast<std::uint8_t>(base + (y * 160) / std::max(1, h));
      p[2] = static_cast<std::uint8_t>(120 + base);
    }
  }
  return img;
}

inline wxaug::ImageRecord original(const std::string& id, wxaug::WeatherCondition c =
                                                              wxaug::WeatherCondition::kDefault) {
  wxaug::ImageRecord r;
  r.id = id;
  r.image_path = "images/" + id + ".png";
  r.condition = c;
  r.provenance = wxaug::Provenance::kCaptured;
  r.review_state = wxaug::ReviewState::kNotApplicable;
  r.annotations = {{{1, 1, 5, 5}, wxaug::ObjectClass::kVehicle}};
  return r;
}

inline wxaug::ImageRecord augmented(const wxaug::ImageRecord& src, wxaug::WeatherCondition c,
                                    const std::string& recipe,
                                    wxaug::ReviewState s = wxaug::ReviewState::kKept) {
  wxaug::ImageRecord r = src;
  r.id = src.id + "__" + recipe;
  r.image_path = "aug/" + r.id + ".png";
  r.condition = c;
  r.provenance = wxaug::Provenance::kAugmented;
  r.source_id = src.id;
  r.recipe_id = recipe;
  r.review_state = s;
  return r;
}

}  // namespace testsupport
