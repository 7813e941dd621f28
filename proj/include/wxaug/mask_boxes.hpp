#pragma once

#include <map>
#include <string_view>
#include <vector>

#include "wxaug/image.hpp"
#include "wxaug/types.hpp"

namespace wxaug {

enum class Connectivity { kFour, kEight };

inline constexpr Connectivity kDefaultConnectivity = Connectivity::kEight;
inline constexpr int kDefaultMinArea = 16;

// Mask class id -> object class; ids not listed are background.
struct ClassMap {
  std::map<int, ObjectClass> entries;
};

/// Parses {"<id>": "<class>"}. Rejects non-integer keys and non-injective maps.
ClassMap parse_class_map(std::string_view json_text);

/// One annotation per connected component (of a single mapped id) with at least
/// `min_area` pixels. Boxes are tight half-open extents, sorted by (class, y_min, x_min).
std::vector<Annotation> boxes_from_mask(const SegmentationImage& seg, const ClassMap& class_map,
                                        Connectivity connectivity, int min_area);

/// Appends mask-derived boxes to the record's annotations. `image_size` is the size of
/// the record's image and must equal the mask size.
ImageRecord enrich_record(const ImageRecord& record, ImageSize image_size,
                          const SegmentationImage& seg, const ClassMap& class_map,
                          Connectivity connectivity, int min_area);

}  // namespace wxaug
