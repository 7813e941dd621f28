#include "wxaug/mask_boxes.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>
#include <tuple>

#include <json.hpp>

namespace wxaug {

namespace {

class DisjointSet {
 public:
  explicit DisjointSet(std::size_t n) : parent_(n) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  }

  std::size_t find(std::size_t v) {
    while (parent_[v] != v) {
      parent_[v] = parent_[parent_[v]];
      v = parent_[v];
    }
    return v;
  }

  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (a < b) std::swap(a, b);
    parent_[a] = b;
  }

 private:
  std::vector<std::size_t> parent_;
};

struct Extent {
  int x_min = std::numeric_limits<int>::max();
  int y_min = std::numeric_limits<int>::max();
  int x_max = -1;
  int y_max = -1;
  long long pixels = 0;
  int id = -1;
};

}  // namespace

ClassMap parse_class_map(std::string_view json_text) {
  auto doc = nlohmann::json::parse(json_text);
  if (!doc.is_object()) throw std::runtime_error("class map: expected an object");
  ClassMap map;
  std::set<ObjectClass> seen;
  for (const auto& [key, value] : doc.items()) {
    std::size_t used = 0;
    int id = 0;
    try {
      id = std::stoi(key, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != key.size() || id < 0) {
      throw std::runtime_error("class map: key '" + key + "' is not a non-negative integer");
    }
    if (!value.is_string()) throw std::runtime_error("class map: value for '" + key + "' must be a string");
    auto cls = parse_class(value.get<std::string>());
    if (!cls) throw std::runtime_error("class map: unknown class '" + value.get<std::string>() + "'");
    if (!seen.insert(*cls).second) {
      throw std::runtime_error("class map: class '" + value.get<std::string>() +
                               "' is mapped from more than one id");
    }
    map.entries[id] = *cls;
  }
  return map;
}

std::vector<Annotation> boxes_from_mask(const SegmentationImage& seg, const ClassMap& class_map,
                                        Connectivity connectivity, int min_area) {
  if (min_area < 1) throw std::invalid_argument("min_area must be at least 1");
  const int w = seg.width();
  const int h = seg.height();
  const auto n = static_cast<std::size_t>(w) * h;
  auto mapped = [&](int id) { return class_map.entries.contains(id); };
  auto index = [w](int x, int y) { return static_cast<std::size_t>(y) * w + x; };

  // First pass: union each foreground pixel with its already-visited neighbours of equal id.
  DisjointSet sets(n);
  std::vector<char> foreground(n, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int id = seg.class_id_at(x, y);
      if (!mapped(id)) continue;
      foreground[index(x, y)] = 1;
      auto link = [&](int nx, int ny) {
        if (nx < 0 || nx >= w || ny < 0) return;
        if (seg.class_id_at(nx, ny) == id) sets.unite(index(x, y), index(nx, ny));
      };
      link(x - 1, y);
      link(x, y - 1);
      if (connectivity == Connectivity::kEight) {
        link(x - 1, y - 1);
        link(x + 1, y - 1);
      }
    }
  }

  // Second pass: accumulate extents per root.
  std::vector<int> slot(n, -1);
  std::vector<Extent> extents;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!foreground[index(x, y)]) continue;
      int& s = slot[sets.find(index(x, y))];
      if (s < 0) {
        s = static_cast<int>(extents.size());
        extents.emplace_back();
      }
      Extent& e = extents[static_cast<std::size_t>(s)];
      e.x_min = std::min(e.x_min, x);
      e.y_min = std::min(e.y_min, y);
      e.x_max = std::max(e.x_max, x);
      e.y_max = std::max(e.y_max, y);
      e.id = seg.class_id_at(x, y);
      ++e.pixels;
    }
  }

  std::vector<Annotation> out;
  for (const auto& e : extents) {
    if (e.pixels < min_area) continue;
    out.push_back({BBox{static_cast<double>(e.x_min), static_cast<double>(e.y_min),
                        static_cast<double>(e.x_max + 1), static_cast<double>(e.y_max + 1)},
                   class_map.entries.at(e.id)});
  }
  std::sort(out.begin(), out.end(), [](const Annotation& a, const Annotation& b) {
    return std::tuple(a.cls, a.bbox.y_min, a.bbox.x_min, a.bbox.y_max, a.bbox.x_max) <
           std::tuple(b.cls, b.bbox.y_min, b.bbox.x_min, b.bbox.y_max, b.bbox.x_max);
  });
  return out;
}

ImageRecord enrich_record(const ImageRecord& record, ImageSize image_size,
                          const SegmentationImage& seg, const ClassMap& class_map,
                          Connectivity connectivity, int min_area) {
  if (image_size != seg.size()) {
    throw std::invalid_argument("record '" + record.id + "': mask is " +
                                std::to_string(seg.width()) + "x" + std::to_string(seg.height()) +
                                " but image is " + std::to_string(image_size.width) + "x" +
                                std::to_string(image_size.height));
  }
  ImageRecord out = record;
  auto derived = boxes_from_mask(seg, class_map, connectivity, min_area);
  out.annotations.insert(out.annotations.end(), derived.begin(), derived.end());
  return out;
}

}  // namespace wxaug
