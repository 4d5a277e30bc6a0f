#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "nemo/dataset.hpp"
#include "nemo/embedding_store.hpp"
#include "nemo/mask.hpp"

namespace nemo::testing {

// Removes itself on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "nemo");
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

std::vector<float> random_unit_rows(std::size_t rows, std::uint32_t dim, std::mt19937_64& gen,
                                    float scale = 1.0f);

// Image ids 1..n_images, sample ids 0..n_texts-1, all rows random unit vectors.
EmbeddingStore random_store(std::size_t n_images, std::size_t n_texts, std::uint32_t dim,
                            std::uint64_t seed);

Bitmap random_bitmap(int height, int width, double density, std::mt19937_64& gen);
// A filled axis-aligned rectangle at a random position.
Bitmap random_blob(int height, int width, std::mt19937_64& gen);

struct FixtureSpec {
  std::size_t n_images = 12;
  std::size_t annotations_per_image = 2;
  std::size_t expressions_per_annotation = 2;
  std::uint32_t dim = 16;
  std::uint64_t seed = 1;
  int min_side = 24;
  int max_side = 48;
};

struct FixturePaths {
  std::filesystem::path annotations;
  std::filesystem::path embeddings;
};

// Writes PNG images, a COCO-style annotation file and a matching embedding
// file under `dir`. Text vectors lean towards their own image's vector.
FixturePaths write_synthetic_fixture(const std::filesystem::path& dir, const FixtureSpec& fixture_spec);

std::vector<std::byte> read_bytes(const std::filesystem::path& path);

}  // namespace nemo::testing
