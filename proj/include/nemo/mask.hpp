#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace nemo {

class MaskError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Box {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  bool empty() const { return w <= 0 || h <= 0; }
  friend bool operator==(const Box&, const Box&) = default;
};

// Dense binary mask, row-major, one byte per pixel (0 or 1).
class Bitmap {
 public:
  Bitmap() = default;
  Bitmap(int height, int width, std::uint8_t fill = 0);

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return bits_.size(); }

  std::uint8_t at(int row, int col) const { return bits_[index(row, col)]; }
  void set(int row, int col, bool on) { bits_[index(row, col)] = on ? 1 : 0; }

  std::span<const std::uint8_t> row(int r) const {
    return {bits_.data() + static_cast<std::size_t>(r) * width_, static_cast<std::size_t>(width_)};
  }
  std::span<std::uint8_t> row(int r) {
    return {bits_.data() + static_cast<std::size_t>(r) * width_, static_cast<std::size_t>(width_)};
  }
  const std::vector<std::uint8_t>& data() const { return bits_; }

  std::size_t count() const;
  // Tight bounding box of the foreground; empty box when there is none.
  Box bbox() const;

  friend bool operator==(const Bitmap&, const Bitmap&) = default;

 private:
  std::size_t index(int row, int col) const {
    return static_cast<std::size_t>(row) * width_ + col;
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> bits_;
};

// COCO run-length encoding: column-major, alternating runs starting with
// background.
struct Rle {
  int height = 0;
  int width = 0;
  std::vector<std::uint32_t> counts;

  friend bool operator==(const Rle&, const Rle&) = default;
};

// COCO polygon list: each ring is x0,y0,x1,y1,... in pixel coordinates.
struct Polygons {
  int height = 0;
  int width = 0;
  std::vector<std::vector<double>> rings;
};

enum class MaskEncoding { kRle, kPolygon, kBitmap };

class SegmentationMask {
 public:
  SegmentationMask() = default;
  SegmentationMask(Rle rle) : payload_(std::move(rle)) {}
  SegmentationMask(Polygons poly) : payload_(std::move(poly)) {}
  SegmentationMask(Bitmap bitmap) : payload_(std::move(bitmap)) {}

  MaskEncoding encoding() const { return static_cast<MaskEncoding>(payload_.index()); }
  int height() const;
  int width() const;

  const std::variant<Rle, Polygons, Bitmap>& payload() const { return payload_; }

 private:
  std::variant<Rle, Polygons, Bitmap> payload_;
};

Bitmap decode_mask(const SegmentationMask& mask);
Bitmap decode_rle(const Rle& rle);
// Even-odd fill sampled at pixel centres, over all rings jointly.
Bitmap rasterize_polygons(const Polygons& poly);
Rle encode_rle(const Bitmap& bitmap);

// COCO compressed-counts string codec (the LEB128-like ASCII form used by
// pycocotools).
std::string rle_counts_to_string(std::span<const std::uint32_t> counts);
std::vector<std::uint32_t> rle_counts_from_string(std::string_view s);

}  // namespace nemo
