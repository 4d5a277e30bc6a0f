#include "nemo/embedding_store.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

namespace nemo {

static_assert(std::endian::native == std::endian::little,
              "embedding file I/O assumes a little-endian host");

namespace {

void check_unit_rows(const std::vector<float>& matrix, std::uint32_t dim, std::size_t rows,
                     const char* kind) {
  for (std::size_t r = 0; r < rows; ++r) {
    double sq = 0.0;
    for (std::uint32_t d = 0; d < dim; ++d) {
      const double x = matrix[r * dim + d];
      sq += x * x;
    }
    const double norm = std::sqrt(sq);
    if (!std::isfinite(norm) || std::abs(norm - 1.0) > kUnitNormTolerance) {
      throw EmbeddingValidationError(std::string(kind) + " row " + std::to_string(r) +
                                         " is not unit-norm (norm " + std::to_string(norm) + ")",
                                     r);
    }
  }
}

class Reader {
 public:
  explicit Reader(std::span<const std::byte> bytes) : bytes_(bytes) {}

  template <typename T>
  T read() {
    T value;
    take(&value, sizeof(T));
    return value;
  }

  void take(void* out, std::size_t n) {
    if (bytes_.size() - pos_ < n) {
      throw EmbeddingFormatError("truncated embedding file at byte " + std::to_string(pos_));
    }
    std::memcpy(out, bytes_.data() + pos_, n);
    pos_ += n;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const std::byte> bytes_;
  std::size_t pos_ = 0;
};

template <typename T>
void append(std::vector<std::byte>& out, const T* data, std::size_t count) {
  const auto* p = reinterpret_cast<const std::byte*>(data);
  out.insert(out.end(), p, p + count * sizeof(T));
}

}  // namespace

EmbeddingStore::EmbeddingStore(std::uint32_t dim, std::vector<ImageId> image_ids,
                               std::vector<float> image_matrix, std::vector<SampleId> sample_ids,
                               std::vector<float> text_matrix)
    : dim_(dim),
      image_ids_(std::move(image_ids)),
      image_matrix_(std::move(image_matrix)),
      sample_ids_(std::move(sample_ids)),
      text_matrix_(std::move(text_matrix)) {
  if (dim_ == 0) throw EmbeddingFormatError("embedding dim must be positive");
  if (image_matrix_.size() != image_ids_.size() * dim_ ||
      text_matrix_.size() != sample_ids_.size() * dim_) {
    throw EmbeddingFormatError("embedding matrix shape does not match id count");
  }
  for (std::size_t i = 0; i < image_ids_.size(); ++i) {
    if (!image_row_.emplace(image_ids_[i], i).second) {
      throw EmbeddingValidationError("duplicate image id " + std::to_string(image_ids_[i]), i);
    }
  }
  for (std::size_t i = 0; i < sample_ids_.size(); ++i) {
    if (!text_row_.emplace(sample_ids_[i], i).second) {
      throw EmbeddingValidationError("duplicate sample id " + std::to_string(sample_ids_[i]), i);
    }
  }
  check_unit_rows(image_matrix_, dim_, image_ids_.size(), "image");
  check_unit_rows(text_matrix_, dim_, sample_ids_.size(), "text");
}

std::size_t EmbeddingStore::image_row(ImageId id) const {
  auto it = image_row_.find(id);
  if (it == image_row_.end()) throw EmbeddingLookupError("no image embedding for id " + std::to_string(id));
  return it->second;
}

std::size_t EmbeddingStore::text_row(SampleId id) const {
  auto it = text_row_.find(id);
  if (it == text_row_.end()) throw EmbeddingLookupError("no text embedding for sample " + std::to_string(id));
  return it->second;
}

std::vector<double> EmbeddingStore::scores_against(std::span<const float> query) const {
  std::vector<double> out(image_ids_.size());
  for (std::size_t r = 0; r < image_ids_.size(); ++r) {
    const float* row = image_matrix_.data() + r * dim_;
    double acc = 0.0;
    for (std::uint32_t d = 0; d < dim_; ++d) acc += static_cast<double>(query[d] * row[d]);
    out[r] = acc;
  }
  return out;
}

EmbeddingStore parse_embeddings(std::span<const std::byte> bytes) {
  Reader in(bytes);
  char magic[8];
  in.take(magic, sizeof(magic));
  if (std::memcmp(magic, kEmbeddingMagic, sizeof(magic)) != 0) {
    throw EmbeddingFormatError("bad magic: not a NEMOEMB1 file");
  }
  const auto dim = in.read<std::uint32_t>();
  const auto n_images = in.read<std::uint32_t>();
  const auto n_texts = in.read<std::uint32_t>();
  if (dim == 0) throw EmbeddingFormatError("embedding dim must be positive");
  const std::uint64_t expected = 8ull * n_images + 8ull * n_texts +
                                 4ull * dim * (static_cast<std::uint64_t>(n_images) + n_texts);
  if (in.remaining() < expected) {
    throw EmbeddingFormatError("truncated embedding payload: need " + std::to_string(expected) +
                               " bytes, have " + std::to_string(in.remaining()));
  }
  if (in.remaining() > expected) throw EmbeddingFormatError("trailing bytes after embedding payload");

  std::vector<ImageId> image_ids(n_images);
  std::vector<SampleId> sample_ids(n_texts);
  std::vector<float> images(static_cast<std::size_t>(n_images) * dim);
  std::vector<float> texts(static_cast<std::size_t>(n_texts) * dim);
  in.take(image_ids.data(), image_ids.size() * sizeof(ImageId));
  in.take(sample_ids.data(), sample_ids.size() * sizeof(SampleId));
  in.take(images.data(), images.size() * sizeof(float));
  in.take(texts.data(), texts.size() * sizeof(float));
  return EmbeddingStore(dim, std::move(image_ids), std::move(images), std::move(sample_ids),
                        std::move(texts));
}

EmbeddingStore load_embeddings(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw EmbeddingFormatError("cannot open embeddings " + path.string());
  std::vector<char> raw((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return parse_embeddings(std::as_bytes(std::span(raw)));
}

std::vector<std::byte> serialize_embeddings(const EmbeddingStore& store) {
  std::vector<std::byte> out;
  append(out, kEmbeddingMagic, sizeof(kEmbeddingMagic));
  const std::uint32_t header[3] = {store.dim(), static_cast<std::uint32_t>(store.image_count()),
                                   static_cast<std::uint32_t>(store.text_count())};
  append(out, header, 3);
  append(out, store.image_ids().data(), store.image_count());
  append(out, store.sample_ids().data(), store.text_count());
  for (std::size_t r = 0; r < store.image_count(); ++r) {
    auto v = store.image_vector(r);
    append(out, v.data(), v.size());
  }
  for (std::size_t r = 0; r < store.text_count(); ++r) {
    auto v = store.text_vector(r);
    append(out, v.data(), v.size());
  }
  return out;
}

void save_embeddings(const EmbeddingStore& store, const std::filesystem::path& path) {
  const auto bytes = serialize_embeddings(store);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("failed writing embeddings " + path.string());
}

namespace {

std::vector<RelevanceScore> label(const EmbeddingStore& store, std::vector<double> scores) {
  std::vector<RelevanceScore> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) out[i] = {store.image_ids()[i], scores[i]};
  return out;
}

}  // namespace

std::vector<RelevanceScore> text_to_image_scores(const EmbeddingStore& store, SampleId sample_id) {
  return label(store, store.scores_against(store.text_vector(store.text_row(sample_id))));
}

std::vector<RelevanceScore> image_to_image_scores(const EmbeddingStore& store, ImageId image_id) {
  return label(store, store.scores_against(store.image_vector(store.image_row(image_id))));
}

CoverageReport check_coverage(const EmbeddingStore& store, const Dataset& dataset) {
  CoverageReport report;
  for (const auto& img : dataset.images)
    if (!store.has_image(img.image_id)) report.missing_images.push_back(img.image_id);
  for (const auto& s : dataset.samples)
    if (!store.has_text(s.sample_id)) report.missing_texts.push_back(s.sample_id);
  return report;
}

}  // namespace nemo
