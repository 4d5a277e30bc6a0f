#include "nemo/mosaic.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>

#include <opencv2/imgproc.hpp>

namespace nemo {

std::string_view to_string(GridKind grid) { return grid == GridKind::k2x2 ? "2x2" : "3x3"; }

std::string_view to_string(CrossPointPolicy policy) {
  switch (policy) {
    case CrossPointPolicy::kFixed: return "fixed";
    case CrossPointPolicy::kAnywhere: return "anywhere";
    case CrossPointPolicy::kCentralQuarter: return "central-quarter";
  }
  return "?";
}

GridKind parse_grid(std::string_view text) {
  if (text == "2x2") return GridKind::k2x2;
  if (text == "3x3") return GridKind::k3x3;
  throw std::invalid_argument("unknown grid '" + std::string(text) + "'");
}

CrossPointPolicy parse_cross_point(std::string_view text) {
  if (text == "fixed") return CrossPointPolicy::kFixed;
  if (text == "anywhere") return CrossPointPolicy::kAnywhere;
  if (text == "central-quarter") return CrossPointPolicy::kCentralQuarter;
  throw std::invalid_argument("unknown cross-point policy '" + std::string(text) + "'");
}

void CompositorOptions::validate() const {
  if (grid == GridKind::k3x3 && constraints) {
    throw std::invalid_argument("positional constraints are defined on 2x2 quadrants; not usable with a 3x3 grid");
  }
  if (grid == GridKind::k3x3 && cross_point != CrossPointPolicy::kFixed) {
    throw std::invalid_argument("the 3x3 grid only supports a fixed cross-point");
  }
}

namespace {

constexpr QuadrantSet bit(Quadrant q) { return static_cast<QuadrantSet>(1u << q); }
constexpr QuadrantSet kUpper = bit(kUpperLeft) | bit(kUpperRight);
constexpr QuadrantSet kLower = bit(kLowerLeft) | bit(kLowerRight);
constexpr QuadrantSet kLeft = bit(kUpperLeft) | bit(kLowerLeft);
constexpr QuadrantSet kRight = bit(kUpperRight) | bit(kLowerRight);

constexpr std::array<PositionalConstraintTable::Entry, 8> kEntries{{
    {"top", kUpper},
    {"high", kUpper},
    {"above", kUpper},
    {"left", kLeft},
    {"right", kRight},
    {"bottom", kLower},
    {"low", kLower},
    {"below", kLower},
}};

constexpr std::array<std::string_view, 2> kUnmapped{"o'clock", "corner"};

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

}  // namespace

std::span<const PositionalConstraintTable::Entry> PositionalConstraintTable::entries() {
  return kEntries;
}

std::span<const std::string_view> PositionalConstraintTable::unmapped_keywords() { return kUnmapped; }

std::vector<std::string> PositionalConstraintTable::tokenize(std::string_view expression) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < expression.size()) {
    while (i < expression.size() && std::isspace(static_cast<unsigned char>(expression[i]))) ++i;
    std::size_t j = i;
    while (j < expression.size() && !std::isspace(static_cast<unsigned char>(expression[j]))) ++j;
    if (j > i) {
      std::string_view tok = expression.substr(i, j - i);
      while (!tok.empty() && !is_word_char(tok.front())) tok.remove_prefix(1);
      while (!tok.empty() && !is_word_char(tok.back())) tok.remove_suffix(1);
      std::string lower(tok);
      std::transform(lower.begin(), lower.end(), lower.begin(),
                     [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
      if (!lower.empty()) tokens.push_back(std::move(lower));
    }
    i = j;
  }
  return tokens;
}

KeywordMatch PositionalConstraintTable::match(std::string_view expression) {
  KeywordMatch m;
  for (const auto& tok : tokenize(expression)) {
    for (const auto& e : kEntries) {
      if (tok == e.keyword && std::find(m.constraining.begin(), m.constraining.end(), tok) == m.constraining.end()) {
        m.constraining.push_back(tok);
        m.allowed &= e.allowed;
      }
    }
    for (auto kw : kUnmapped) {
      if (tok == kw && std::find(m.unmapped.begin(), m.unmapped.end(), tok) == m.unmapped.end()) {
        m.unmapped.push_back(tok);
      }
    }
  }
  return m;
}

std::vector<CellRect> MosaicPlan::cells() const {
  std::vector<int> rows, cols;
  if (grid == GridKind::k2x2) {
    rows = {0, cross_y, canvas_h};
    cols = {0, cross_x, canvas_w};
  } else {
    rows = {0, canvas_h / 3, 2 * canvas_h / 3, canvas_h};
    cols = {0, canvas_w / 3, 2 * canvas_w / 3, canvas_w};
  }
  std::vector<CellRect> out;
  for (std::size_t r = 0; r + 1 < rows.size(); ++r) {
    for (std::size_t c = 0; c + 1 < cols.size(); ++c) {
      out.push_back({rows[r], cols[c], rows[r + 1] - rows[r], cols[c + 1] - cols[c]});
    }
  }
  return out;
}

MosaicPlan plan_mosaic(const ReferringSample& sample, std::span<const ImageId> negatives,
                       const CompositorOptions& options, Rng& rng) {
  options.validate();
  const int cells = cell_count(options.grid);
  if (static_cast<int>(negatives.size()) != cells - 1) {
    throw MosaicError("a " + std::string(to_string(options.grid)) + " mosaic needs " +
                      std::to_string(cells - 1) + " negatives, got " + std::to_string(negatives.size()));
  }

  MosaicPlan plan;
  plan.grid = options.grid;
  plan.canvas_h = sample.mask.height();
  plan.canvas_w = sample.mask.width();
  const int min_side = options.grid == GridKind::k2x2 ? 2 : 3;
  if (plan.canvas_h < min_side || plan.canvas_w < min_side) {
    throw MosaicError("canvas " + std::to_string(plan.canvas_w) + "x" + std::to_string(plan.canvas_h) +
                      " is too small for a " + std::string(to_string(options.grid)) + " mosaic");
  }
  plan.negative_ids.assign(negatives.begin(), negatives.end());

  const int h = plan.canvas_h, w = plan.canvas_w;
  if (options.grid == GridKind::k3x3) {
    plan.cross_y = h / 3;
    plan.cross_x = w / 3;
  } else {
    switch (options.cross_point) {
      case CrossPointPolicy::kFixed:
        plan.cross_y = h / 2;
        plan.cross_x = w / 2;
        break;
      case CrossPointPolicy::kAnywhere:
        plan.cross_y = static_cast<int>(rng.between(1, h - 1));
        plan.cross_x = static_cast<int>(rng.between(1, w - 1));
        break;
      case CrossPointPolicy::kCentralQuarter:
        plan.cross_y = static_cast<int>(rng.between(std::max(1, h / 4), std::min(h - 1, 3 * h / 4)));
        plan.cross_x = static_cast<int>(rng.between(std::max(1, w / 4), std::min(w - 1, 3 * w / 4)));
        break;
    }
  }

  const KeywordMatch match = PositionalConstraintTable::match(sample.expression);
  plan.positional_keywords = match.constraining;
  plan.positional_keywords.insert(plan.positional_keywords.end(), match.unmapped.begin(), match.unmapped.end());

  QuadrantSet allowed = kAllQuadrants;
  if (options.constraints && !match.constraining.empty()) {
    if (match.allowed == 0) {
      plan.constraint_fallback = true;
    } else {
      allowed = match.allowed;
    }
  }
  if (options.grid == GridKind::k3x3) {
    plan.positive_cell = static_cast<int>(rng.below(9));
  } else {
    // k-th set bit of `allowed`, k uniform.
    auto k = static_cast<int>(rng.below(static_cast<std::uint64_t>(std::popcount(allowed))));
    for (int q = 0; q < 4; ++q) {
      if (!(allowed & (1u << q))) continue;
      if (k-- == 0) {
        plan.positive_cell = q;
        break;
      }
    }
  }
  return plan;
}

Bitmap resize_nearest(const Bitmap& src, int dst_h, int dst_w) {
  Bitmap out(dst_h, dst_w);
  if (src.height() == 0 || src.width() == 0) return out;
  std::vector<int> col_map(static_cast<std::size_t>(dst_w));
  for (int c = 0; c < dst_w; ++c) {
    col_map[c] = static_cast<int>((2LL * c + 1) * src.width() / (2LL * dst_w));
  }
  for (int r = 0; r < dst_h; ++r) {
    const int sr = static_cast<int>((2LL * r + 1) * src.height() / (2LL * dst_h));
    auto src_row = src.row(sr);
    auto dst_row = out.row(r);
    for (int c = 0; c < dst_w; ++c) dst_row[c] = src_row[col_map[c]];
  }
  return out;
}

AugmentedSample compose(const ReferringSample& sample, const cv::Mat& positive_image,
                        std::span<const cv::Mat> negative_images, const MosaicPlan& plan) {
  if (negative_images.size() != plan.negative_ids.size()) {
    throw MosaicError("compose got " + std::to_string(negative_images.size()) + " negative images for " +
                      std::to_string(plan.negative_ids.size()) + " planned negatives");
  }
  if (positive_image.empty()) throw ComposeError(sample.image_id, "positive image " + std::to_string(sample.image_id) + " is empty");
  if (positive_image.rows != plan.canvas_h || positive_image.cols != plan.canvas_w) {
    throw ComposeError(sample.image_id, "positive image size differs from the planned canvas");
  }

  AugmentedSample out;
  out.sample_id = sample.sample_id;
  out.expression = sample.expression;
  out.category_id = sample.category_id;
  out.plan = plan;
  out.image = cv::Mat(plan.canvas_h, plan.canvas_w, CV_8UC3, cv::Scalar::all(0));
  out.mask = Bitmap(plan.canvas_h, plan.canvas_w);

  const Bitmap source_mask = decode_mask(sample.mask);
  const auto cells = plan.cells();
  std::size_t next_negative = 0;
  for (int i = 0; i < static_cast<int>(cells.size()); ++i) {
    const CellRect& cell = cells[i];
    const cv::Mat* src = &positive_image;
    ImageId src_id = sample.image_id;
    if (i != plan.positive_cell) {
      src = &negative_images[next_negative];
      src_id = plan.negative_ids[next_negative];
      ++next_negative;
    }
    if (src->empty() || src->type() != CV_8UC3) {
      throw ComposeError(src_id, "image " + std::to_string(src_id) + " is unreadable or not 8-bit BGR");
    }
    cv::Mat roi = out.image(cv::Rect(cell.x, cell.y, cell.w, cell.h));
    cv::resize(*src, roi, roi.size(), 0, 0, cv::INTER_LINEAR);

    if (i == plan.positive_cell) {
      const Bitmap scaled = resize_nearest(source_mask, cell.h, cell.w);
      for (int r = 0; r < cell.h; ++r) {
        auto from = scaled.row(r);
        std::copy(from.begin(), from.end(), out.mask.row(cell.y + r).begin() + cell.x);
      }
    }
  }
  return out;
}

cv::Mat render_preview(const AugmentedSample& sample) {
  cv::Mat preview = sample.image.clone();
  for (int r = 0; r < preview.rows; ++r) {
    auto* px = preview.ptr<cv::Vec3b>(r);
    auto bits = sample.mask.row(r);
    for (int c = 0; c < preview.cols; ++c) {
      if (!bits[c]) continue;
      px[c][2] = static_cast<std::uint8_t>((px[c][2] + 255) / 2);
      px[c][1] = static_cast<std::uint8_t>(px[c][1] / 2);
      px[c][0] = static_cast<std::uint8_t>(px[c][0] / 2);
    }
  }
  for (const auto& cell : sample.plan.cells()) {
    cv::rectangle(preview, cv::Rect(cell.x, cell.y, cell.w, cell.h), cv::Scalar(255, 255, 255), 1);
  }
  return preview;
}

}  // namespace nemo
