#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

namespace wxaug {

class ImageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ImageSize {
  int width = 0;
  int height = 0;
  bool operator==(const ImageSize&) const = default;
};

// 8-bit interleaved pixels, 1 (gray) or 3 (RGB) channels, row-major.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 3;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(int w, int h, int c, std::uint8_t fill = 0)
      : width(w), height(h), channels(c),
        pixels(static_cast<std::size_t>(w) * h * c, fill) {}

  ImageSize size() const { return {width, height}; }
  std::uint8_t* at(int x, int y) {
    return pixels.data() + (static_cast<std::size_t>(y) * width + x) * channels;
  }
  const std::uint8_t* at(int x, int y) const {
    return pixels.data() + (static_cast<std::size_t>(y) * width + x) * channels;
  }

  bool operator==(const Image&) const = default;
};

/// PNG or JPEG, detected by signature. Alpha is dropped; gray stays single-channel.
Image decode_image(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_png(const Image& image);

Image read_image(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image& image);

/// Per-pixel integer class labels.
class SegmentationImage {
 public:
  SegmentationImage() = default;
  SegmentationImage(int width, int height, std::vector<int> ids);
  SegmentationImage(int width, int height, int fill = 0);

  int width() const { return width_; }
  int height() const { return height_; }
  ImageSize size() const { return {width_, height_}; }
  int class_id_at(int x, int y) const { return ids_[static_cast<std::size_t>(y) * width_ + x]; }
  void set(int x, int y, int id) { ids_[static_cast<std::size_t>(y) * width_ + x] = id; }
  const std::vector<int>& ids() const { return ids_; }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<int> ids_;
};

enum class SegChannel { kGray, kRed };

/// kGray needs a single-channel image; kRed reads the red channel (simulator convention).
SegmentationImage segmentation_from_image(const Image& image, SegChannel channel);

}  // namespace wxaug
