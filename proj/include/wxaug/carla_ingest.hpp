#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "wxaug/image.hpp"
#include "wxaug/types.hpp"

namespace wxaug {

inline constexpr double kDefaultMinVisibleFraction = 0.2;

class IngestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RawCarlaBox {
  BBox bbox;  // may extend past the frame; not required to satisfy BBox::valid()
  ObjectClass cls = ObjectClass::kVehicle;
  int seg_class_id = 0;

  bool operator==(const RawCarlaBox&) const = default;
};

// Integer pixel window [x0, x1) x [y0, y1) covered by a box after clipping.
struct PixelWindow {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  long long area() const { return static_cast<long long>(x1 - x0) * (y1 - y0); }
};

/// Empty window when the box misses the image.
PixelWindow pixel_window(const BBox& box, ImageSize size);

/// Share of the clipped box's pixels whose segmentation id equals the box's id.
/// Throws IngestError when the box lies fully outside the image.
double visible_fraction(const RawCarlaBox& box, const SegmentationImage& seg);

struct GhostFilterResult {
  std::vector<Annotation> kept;     // clipped to the image
  std::vector<RawCarlaBox> removed;
};

GhostFilterResult filter_ghost_boxes(const std::vector<RawCarlaBox>& boxes,
                                     const SegmentationImage& seg, double min_visible_fraction);

struct CarlaFrame {
  std::string frame_id;
  std::vector<RawCarlaBox> boxes;
};

/// One JSON Lines entry: {"frame_id","boxes":[{"class","seg_class_id","bbox":[...]}]}.
CarlaFrame parse_carla_frame(std::string_view line);
std::vector<CarlaFrame> parse_carla_frames(std::string_view jsonl);

/// Builds a rendered-provenance record whose annotations are the non-ghost boxes.
ImageRecord ingest_carla_frame(ImageSize rgb_size, const SegmentationImage& seg,
                               const std::vector<RawCarlaBox>& boxes, WeatherCondition condition,
                               double min_visible_fraction, std::string record_id,
                               std::string image_path);

}  // namespace wxaug
