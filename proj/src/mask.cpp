#include "nemo/mask.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace nemo {

Bitmap::Bitmap(int height, int width, std::uint8_t fill)
    : height_(height), width_(width),
      bits_(static_cast<std::size_t>(std::max(height, 0)) * std::max(width, 0), fill ? 1 : 0) {
  if (height < 0 || width < 0) throw MaskError("negative bitmap dimensions");
}

std::size_t Bitmap::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

Box Bitmap::bbox() const {
  int top = height_, bottom = -1, left = width_, right = -1;
  for (int r = 0; r < height_; ++r) {
    auto line = row(r);
    for (int c = 0; c < width_; ++c) {
      if (!line[c]) continue;
      top = std::min(top, r);
      bottom = std::max(bottom, r);
      left = std::min(left, c);
      right = std::max(right, c);
    }
  }
  if (bottom < 0) return {};
  return {left, top, right - left + 1, bottom - top + 1};
}

namespace {

int dim_height(const Bitmap& b) { return b.height(); }
int dim_width(const Bitmap& b) { return b.width(); }
template <typename T>
int dim_height(const T& p) { return p.height; }
template <typename T>
int dim_width(const T& p) { return p.width; }

}  // namespace

int SegmentationMask::height() const {
  return std::visit([](const auto& p) { return dim_height(p); }, payload_);
}

int SegmentationMask::width() const {
  return std::visit([](const auto& p) { return dim_width(p); }, payload_);
}

Bitmap decode_rle(const Rle& rle) {
  if (rle.height < 0 || rle.width < 0) throw MaskError("negative RLE dimensions");
  const std::uint64_t total = static_cast<std::uint64_t>(rle.height) * rle.width;
  const std::uint64_t run_sum =
      std::accumulate(rle.counts.begin(), rle.counts.end(), std::uint64_t{0});
  if (run_sum != total) {
    throw MaskError("corrupt RLE: runs sum to " + std::to_string(run_sum) + ", expected " +
                    std::to_string(total));
  }
  Bitmap out(rle.height, rle.width);
  std::uint64_t pos = 0;
  bool on = false;
  for (std::uint32_t run : rle.counts) {
    if (on) {
      for (std::uint64_t p = pos; p < pos + run; ++p) {
        // Column-major position.
        const int col = static_cast<int>(p / rle.height);
        const int row = static_cast<int>(p % rle.height);
        out.set(row, col, true);
      }
    }
    pos += run;
    on = !on;
  }
  return out;
}

Rle encode_rle(const Bitmap& bitmap) {
  Rle rle{bitmap.height(), bitmap.width(), {}};
  std::uint8_t current = 0;
  std::uint32_t run = 0;
  for (int c = 0; c < bitmap.width(); ++c) {
    for (int r = 0; r < bitmap.height(); ++r) {
      const std::uint8_t v = bitmap.at(r, c);
      if (v != current) {
        rle.counts.push_back(run);
        run = 0;
        current = v;
      }
      ++run;
    }
  }
  rle.counts.push_back(run);
  return rle;
}

Bitmap rasterize_polygons(const Polygons& poly) {
  Bitmap out(poly.height, poly.width);
  std::vector<double> crossings;
  for (int r = 0; r < poly.height; ++r) {
    const double y = r + 0.5;
    crossings.clear();
    for (const auto& ring : poly.rings) {
      if (ring.size() % 2 != 0) throw MaskError("polygon ring has an odd coordinate count");
      const std::size_t n = ring.size() / 2;
      if (n < 3) continue;
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = (i + 1) % n;
        const double x0 = ring[2 * i], y0 = ring[2 * i + 1];
        const double x1 = ring[2 * j], y1 = ring[2 * j + 1];
        // Half-open rule on y so shared vertices are counted once.
        if ((y0 <= y) == (y1 <= y)) continue;
        crossings.push_back(x0 + (y - y0) * (x1 - x0) / (y1 - y0));
      }
    }
    std::sort(crossings.begin(), crossings.end());
    for (std::size_t k = 0; k + 1 < crossings.size(); k += 2) {
      // Pixel c is inside when its centre c + 0.5 lies in [a, b).
      const int first = std::max(0, static_cast<int>(std::ceil(crossings[k] - 0.5)));
      const int last = std::min(poly.width, static_cast<int>(std::ceil(crossings[k + 1] - 0.5)));
      for (int c = first; c < last; ++c) out.set(r, c, true);
    }
  }
  return out;
}

Bitmap decode_mask(const SegmentationMask& mask) {
  struct Visitor {
    Bitmap operator()(const Rle& rle) const { return decode_rle(rle); }
    Bitmap operator()(const Polygons& poly) const { return rasterize_polygons(poly); }
    Bitmap operator()(const Bitmap& bitmap) const { return bitmap; }
  };
  return std::visit(Visitor{}, mask.payload());
}

std::string rle_counts_to_string(std::span<const std::uint32_t> counts) {
  std::string out;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    long long x = counts[i];
    if (i > 2) x -= static_cast<long long>(counts[i - 2]);
    bool more = true;
    while (more) {
      long long c = x & 0x1f;
      x >>= 5;
      more = (c & 0x10) ? x != -1 : x != 0;
      if (more) c |= 0x20;
      out.push_back(static_cast<char>(c + 48));
    }
  }
  return out;
}

std::vector<std::uint32_t> rle_counts_from_string(std::string_view s) {
  std::vector<std::uint32_t> counts;
  std::size_t p = 0;
  while (p < s.size()) {
    long long x = 0;
    int k = 0;
    bool more = true;
    while (more) {
      if (p >= s.size()) throw MaskError("truncated compressed RLE string");
      const long long c = static_cast<long long>(s[p]) - 48;
      if (c < 0 || c > 63) throw MaskError("invalid character in compressed RLE string");
      x |= (c & 0x1f) << (5 * k);
      more = (c & 0x20) != 0;
      ++p;
      ++k;
      if (!more && (c & 0x10)) x |= -1LL << (5 * k);
    }
    if (counts.size() > 2) x += counts[counts.size() - 2];
    if (x < 0 || x > 0xffffffffLL) throw MaskError("compressed RLE run out of range");
    counts.push_back(static_cast<std::uint32_t>(x));
  }
  return counts;
}

}  // namespace nemo
