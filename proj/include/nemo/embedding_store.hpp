#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "nemo/dataset.hpp"

namespace nemo {

class EmbeddingFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EmbeddingValidationError : public std::runtime_error {
 public:
  EmbeddingValidationError(const std::string& what, std::size_t row)
      : std::runtime_error(what), row_(row) {}
  std::size_t row() const { return row_; }

 private:
  std::size_t row_;
};

class EmbeddingLookupError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

inline constexpr char kEmbeddingMagic[8] = {'N', 'E', 'M', 'O', 'E', 'M', 'B', '1'};
inline constexpr double kUnitNormTolerance = 1e-5;

struct RelevanceScore {
  ImageId image_id = 0;
  double score = 0.0;
};

// Row-major, unit-norm image and text embeddings. Immutable once built;
// concurrent queries are safe.
class EmbeddingStore {
 public:
  EmbeddingStore() = default;
  // Validates shapes, uniqueness and unit norms; throws on violation.
  EmbeddingStore(std::uint32_t dim, std::vector<ImageId> image_ids, std::vector<float> image_matrix,
                 std::vector<SampleId> sample_ids, std::vector<float> text_matrix);

  std::uint32_t dim() const { return dim_; }
  std::size_t image_count() const { return image_ids_.size(); }
  std::size_t text_count() const { return sample_ids_.size(); }
  const std::vector<ImageId>& image_ids() const { return image_ids_; }
  const std::vector<SampleId>& sample_ids() const { return sample_ids_; }

  bool has_image(ImageId id) const { return image_row_.contains(id); }
  bool has_text(SampleId id) const { return text_row_.contains(id); }
  std::size_t image_row(ImageId id) const;
  std::size_t text_row(SampleId id) const;

  std::span<const float> image_vector(std::size_t row) const {
    return {image_matrix_.data() + row * dim_, dim_};
  }
  std::span<const float> text_vector(std::size_t row) const {
    return {text_matrix_.data() + row * dim_, dim_};
  }

  // Scores against every image row, in row order. float products are
  // accumulated sequentially in double.
  std::vector<double> scores_against(std::span<const float> query) const;

 private:
  std::uint32_t dim_ = 0;
  std::vector<ImageId> image_ids_;
  std::vector<float> image_matrix_;
  std::vector<SampleId> sample_ids_;
  std::vector<float> text_matrix_;
  std::unordered_map<ImageId, std::size_t> image_row_;
  std::unordered_map<SampleId, std::size_t> text_row_;
};

EmbeddingStore load_embeddings(const std::filesystem::path& path);
EmbeddingStore parse_embeddings(std::span<const std::byte> bytes);
// Serializes in the NEMOEMB1 layout (little-endian).
std::vector<std::byte> serialize_embeddings(const EmbeddingStore& store);
void save_embeddings(const EmbeddingStore& store, const std::filesystem::path& path);

// rho = t . v(i) for the sample's expression against every image.
std::vector<RelevanceScore> text_to_image_scores(const EmbeddingStore& store, SampleId sample_id);
// v . v(i) for the given image against every image, itself included.
std::vector<RelevanceScore> image_to_image_scores(const EmbeddingStore& store, ImageId image_id);

// Ids of dataset images / samples with no embedding row.
struct CoverageReport {
  std::vector<ImageId> missing_images;
  std::vector<SampleId> missing_texts;
  bool complete() const { return missing_images.empty() && missing_texts.empty(); }
};
CoverageReport check_coverage(const EmbeddingStore& store, const Dataset& dataset);

}  // namespace nemo
