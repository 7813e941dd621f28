#include "wxaug/carla_ingest.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "wxaug/json_codec.hpp"

namespace wxaug {

using nlohmann::json;

namespace {

int clamp_to(double v, int hi) {
  if (!(v > 0)) return 0;  // also maps NaN to 0
  if (v >= hi) return hi;
  return static_cast<int>(v);
}

std::string box_name(const RawCarlaBox& b) {
  return std::string(to_string(b.cls)) + " box [" + std::to_string(b.bbox.x_min) + ", " +
         std::to_string(b.bbox.y_min) + ", " + std::to_string(b.bbox.x_max) + ", " +
         std::to_string(b.bbox.y_max) + "]";
}

}  // namespace

PixelWindow pixel_window(const BBox& box, ImageSize size) {
  PixelWindow w;
  w.x0 = clamp_to(std::floor(box.x_min), size.width);
  w.y0 = clamp_to(std::floor(box.y_min), size.height);
  w.x1 = clamp_to(std::ceil(box.x_max), size.width);
  w.y1 = clamp_to(std::ceil(box.y_max), size.height);
  if (w.x1 <= w.x0 || w.y1 <= w.y0) return PixelWindow{};
  return w;
}

double visible_fraction(const RawCarlaBox& box, const SegmentationImage& seg) {
  PixelWindow w = pixel_window(box.bbox, seg.size());
  if (w.area() == 0) throw IngestError(box_name(box) + " lies outside the image");
  long long matching = 0;
  for (int y = w.y0; y < w.y1; ++y) {
    for (int x = w.x0; x < w.x1; ++x) {
      if (seg.class_id_at(x, y) == box.seg_class_id) ++matching;
    }
  }
  return static_cast<double>(matching) / static_cast<double>(w.area());
}

GhostFilterResult filter_ghost_boxes(const std::vector<RawCarlaBox>& boxes,
                                     const SegmentationImage& seg, double min_visible_fraction) {
  if (!(min_visible_fraction >= 0.0 && min_visible_fraction <= 1.0)) {
    throw IngestError("min_visible_fraction must lie in [0, 1]");
  }
  GhostFilterResult out;
  const auto w = static_cast<double>(seg.width());
  const auto h = static_cast<double>(seg.height());
  for (const auto& box : boxes) {
    if (visible_fraction(box, seg) >= min_visible_fraction) {
      BBox clipped{std::clamp(box.bbox.x_min, 0.0, w), std::clamp(box.bbox.y_min, 0.0, h),
                   std::clamp(box.bbox.x_max, 0.0, w), std::clamp(box.bbox.y_max, 0.0, h)};
      if (clipped.valid()) {
        out.kept.push_back({clipped, box.cls});
        continue;
      }
    }
    out.removed.push_back(box);
  }
  return out;
}

CarlaFrame parse_carla_frame(std::string_view line) {
  json j = json::parse(line);
  CarlaFrame frame;
  frame.frame_id = codec::string_field(j, "frame_id");
  const json& boxes = codec::require(j, "boxes");
  if (!boxes.is_array()) throw codec::FieldError("boxes", "expected a list");
  for (const auto& jb : boxes) {
    RawCarlaBox b;
    b.cls = codec::enum_field(jb, "class", parse_class);
    const json& id = codec::require(jb, "seg_class_id");
    if (!id.is_number_integer() || id.get<long long>() < 0) {
      throw codec::FieldError("seg_class_id", "expected a non-negative integer");
    }
    b.seg_class_id = id.get<int>();
    b.bbox = codec::bbox_from_json(codec::require(jb, "bbox"));
    frame.boxes.push_back(b);
  }
  return frame;
}

std::vector<CarlaFrame> parse_carla_frames(std::string_view jsonl) {
  std::vector<CarlaFrame> frames;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < jsonl.size()) {
    std::size_t end = jsonl.find('\n', pos);
    if (end == std::string_view::npos) end = jsonl.size();
    std::string_view line = jsonl.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      frames.push_back(parse_carla_frame(line));
    } catch (const std::exception& e) {
      throw IngestError("frames line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return frames;
}

ImageRecord ingest_carla_frame(ImageSize rgb_size, const SegmentationImage& seg,
                               const std::vector<RawCarlaBox>& boxes, WeatherCondition condition,
                               double min_visible_fraction, std::string record_id,
                               std::string image_path) {
  if (rgb_size != seg.size()) {
    throw IngestError("frame '" + record_id + "': RGB is " + std::to_string(rgb_size.width) +
                      "x" + std::to_string(rgb_size.height) + " but segmentation is " +
                      std::to_string(seg.width()) + "x" + std::to_string(seg.height()));
  }
  if (!condition_allowed(Framework::kSimulated, condition)) {
    throw IngestError("frame '" + record_id + "': the simulator cannot render " +
                      std::string(to_string(condition)));
  }
  ImageRecord record;
  record.id = std::move(record_id);
  record.image_path = std::move(image_path);
  record.condition = condition;
  record.provenance = Provenance::kRendered;
  record.annotations = filter_ghost_boxes(boxes, seg, min_visible_fraction).kept;
  return record;
}

}  // namespace wxaug
