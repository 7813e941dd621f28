#pragma once

#include <cstddef>
#include <set>
#include <string>
#include <string_view>

#include "wxaug/manifest.hpp"

namespace wxaug {

/// Which images count as clear-weather daytime. Both sets are matched exactly.
struct BddFilter {
  std::set<std::string> weather = {"clear"};
  std::set<std::string> timeofday = {"daytime"};
};

struct BddImportResult {
  DatasetManifest manifest;
  std::size_t entries = 0;
  std::size_t excluded = 0;               // known attributes outside the filter
  std::size_t unknown_weather_skipped = 0;
  std::size_t unmapped_labels = 0;        // categories outside the four classes
  std::size_t degenerate_boxes = 0;       // zero-area boxes dropped
};

/// Maps a BDD100K category onto the four-class universe.
std::optional<ObjectClass> map_bdd_category(std::string_view category);

/// `image_root` is prefixed to each entry's "name" to form the relative image path.
/// Throws std::runtime_error naming the entry index for malformed entries.
BddImportResult import_bdd100k(std::string_view labels, const std::string& image_root,
                               const BddFilter& filter = {});

}  // namespace wxaug
