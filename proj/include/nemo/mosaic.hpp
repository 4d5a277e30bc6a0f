#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>
#include <opencv2/core.hpp>

#include "nemo/dataset.hpp"
#include "nemo/mask.hpp"
#include "nemo/rng.hpp"

namespace nemo {

enum class GridKind { k2x2, k3x3 };
enum class CrossPointPolicy { kFixed, kAnywhere, kCentralQuarter };

std::string_view to_string(GridKind grid);
std::string_view to_string(CrossPointPolicy policy);
GridKind parse_grid(std::string_view text);
CrossPointPolicy parse_cross_point(std::string_view text);

inline int cell_count(GridKind grid) { return grid == GridKind::k2x2 ? 4 : 9; }

struct CompositorOptions {
  GridKind grid = GridKind::k2x2;
  CrossPointPolicy cross_point = CrossPointPolicy::kFixed;
  bool constraints = false;

  // Throws std::invalid_argument for pairings with no defined behaviour
  // (3x3 with constraints or a moving cross-point).
  void validate() const;
  friend bool operator==(const CompositorOptions&, const CompositorOptions&) = default;
};

// Row-major quadrant indices.
enum Quadrant : int { kUpperLeft = 0, kUpperRight = 1, kLowerLeft = 2, kLowerRight = 3 };

// Bit q set means quadrant q is allowed.
using QuadrantSet = std::uint8_t;
inline constexpr QuadrantSet kAllQuadrants = 0b1111;

struct KeywordMatch {
  std::vector<std::string> constraining;  // keywords with a quadrant rule
  std::vector<std::string> unmapped;      // positional words without one (o'clock, corner)
  QuadrantSet allowed = kAllQuadrants;    // intersection over `constraining`
};

// Keyword -> allowed quadrants for positional words in an expression.
class PositionalConstraintTable {
 public:
  struct Entry {
    std::string_view keyword;
    QuadrantSet allowed;
  };

  static std::span<const Entry> entries();
  static std::span<const std::string_view> unmapped_keywords();

  // Lower-cased whitespace tokens with surrounding punctuation stripped.
  static std::vector<std::string> tokenize(std::string_view expression);
  static KeywordMatch match(std::string_view expression);
};

struct CellRect {
  int y = 0;
  int x = 0;
  int h = 0;
  int w = 0;
  friend bool operator==(const CellRect&, const CellRect&) = default;
};

struct MosaicPlan {
  int canvas_h = 0;
  int canvas_w = 0;
  GridKind grid = GridKind::k2x2;
  int cross_y = 0;
  int cross_x = 0;
  int positive_cell = 0;
  std::vector<ImageId> negative_ids;  // fill the non-positive cells row-major
  bool constraint_fallback = false;   // constrained draw had an empty intersection
  std::vector<std::string> positional_keywords;

  // Cells in row-major order; they tile the canvas exactly.
  std::vector<CellRect> cells() const;
};

class MosaicError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ComposeError : public std::runtime_error {
 public:
  ComposeError(ImageId id, const std::string& what) : std::runtime_error(what), id_(id) {}
  ImageId image_id() const { return id_; }

 private:
  ImageId id_;
};

// Canvas = the positive image's size (read from the sample's mask).
MosaicPlan plan_mosaic(const ReferringSample& sample, std::span<const ImageId> negatives,
                       const CompositorOptions& options, Rng& rng);

struct Provenance {
  SampleId source_sample_id = 0;
  ImageId source_image_id = 0;
  std::vector<ImageId> negative_ids;
  int positive_cell = 0;
  std::uint64_t seed = 0;
  nlohmann::json config;  // snapshot of the settings that produced this record
};

struct AugmentedSample {
  SampleId sample_id = 0;
  std::string expression;
  int category_id = 0;
  cv::Mat image;  // 8-bit BGR, canvas_h x canvas_w
  Bitmap mask;
  MosaicPlan plan;
  Provenance provenance;
};

// Nearest-neighbour resize, sampling each destination pixel centre.
Bitmap resize_nearest(const Bitmap& src, int dst_h, int dst_w);

// negatives must be in plan.negative_ids order.
AugmentedSample compose(const ReferringSample& sample, const cv::Mat& positive_image,
                        std::span<const cv::Mat> negative_images, const MosaicPlan& plan);

// Composed image with the mask tinted red, for eyeballing.
cv::Mat render_preview(const AugmentedSample& sample);

}  // namespace nemo
