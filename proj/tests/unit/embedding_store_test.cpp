#include <algorithm>
#include <cstring>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "nemo/embedding_store.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

namespace nemo {
namespace {

EmbeddingStore orthonormal_store() {
  // Images are the standard basis of R^3; texts pick one axis each.
  std::vector<float> images{1, 0, 0, 0, 1, 0, 0, 0, 1};
  std::vector<float> texts{0, 1, 0, 0, 0, 1};
  return EmbeddingStore(3, {10, 20, 30}, std::move(images), {0, 1}, std::move(texts));
}

TEST(EmbeddingStore, OrthonormalScores) {
  const auto store = orthonormal_store();
  const auto t2i = text_to_image_scores(store, 0);
  ASSERT_EQ(t2i.size(), 3u);
  EXPECT_EQ(t2i[0].image_id, 10u);
  EXPECT_DOUBLE_EQ(t2i[0].score, 0.0);
  EXPECT_DOUBLE_EQ(t2i[1].score, 1.0);
  EXPECT_DOUBLE_EQ(t2i[2].score, 0.0);
  const auto i2i = image_to_image_scores(store, 30);
  EXPECT_DOUBLE_EQ(i2i[2].score, 1.0);
  EXPECT_DOUBLE_EQ(i2i[0].score, 0.0);
}

TEST(EmbeddingStore, EmptyFileRoundTrip) {
  const EmbeddingStore empty(16, {}, {}, {}, {});
  const auto back = parse_embeddings(serialize_embeddings(empty));
  EXPECT_EQ(back.dim(), 16u);
  EXPECT_EQ(back.image_count(), 0u);
  EXPECT_EQ(back.text_count(), 0u);
}

TEST(EmbeddingStore, SelfAndOrthogonalScores) {
  std::mt19937_64 gen(31);
  auto images = testing::random_unit_rows(6, 8, gen);
  std::vector<float> text(images.begin() + 3 * 8, images.begin() + 4 * 8);
  const EmbeddingStore store(8, {1, 2, 3, 4, 5, 6}, images, {0}, text);
  EXPECT_NEAR(text_to_image_scores(store, 0)[3].score, 1.0, 1e-6);

  std::vector<float> axis_images{1, 0, 0, 0, 1, 0};
  const EmbeddingStore ortho(3, {1, 2}, axis_images, {0}, {0, 0, 1});
  for (const auto& s : text_to_image_scores(ortho, 0)) EXPECT_NEAR(s.score, 0.0, 1e-6);
}

TEST(EmbeddingStore, ImageScoresAreSymmetric) {
  const auto store = testing::random_store(40, 1, 24, 5);
  for (ImageId a = 1; a <= 40; ++a) {
    const auto from_a = image_to_image_scores(store, a);
    for (ImageId b = 1; b <= 40; ++b) {
      const auto from_b = image_to_image_scores(store, b);
      EXPECT_NEAR(from_a[b - 1].score, from_b[a - 1].score, 1e-12);
    }
    EXPECT_NEAR(from_a[a - 1].score, 1.0, 1e-5);
  }
}

TEST(EmbeddingStore, RankingInvariantToQueryScale) {
  const auto store = testing::random_store(200, 1, 16, 9);
  std::mt19937_64 gen(4);
  auto query = testing::random_unit_rows(1, 16, gen);
  auto argsort = [](const std::vector<double>& s) {
    std::vector<std::size_t> idx(s.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return s[a] > s[b]; });
    return idx;
  };
  const auto base = argsort(store.scores_against(query));
  for (float scale : {0.5f, 2.0f, 8.0f}) {
    std::vector<float> scaled(query);
    for (auto& x : scaled) x *= scale;
    EXPECT_EQ(argsort(store.scores_against(scaled)), base) << "scale " << scale;
  }
}

TEST(EmbeddingStore, MatchesNaiveLoop) {
  const auto store = testing::random_store(1000, 20, 32, 21);
  for (SampleId s = 0; s < 20; ++s) {
    const auto scores = text_to_image_scores(store, s);
    const auto text = store.text_vector(store.text_row(s));
    for (std::size_t r = 0; r < 1000; ++r) {
      ASSERT_NEAR(scores[r].score, oracle::naive_dot(text, store.image_vector(r)), 1e-6);
    }
  }
}

TEST(EmbeddingStore, SerializeRoundTrip) {
  const auto store = testing::random_store(7, 5, 8, 2);
  const auto bytes = serialize_embeddings(store);
  EXPECT_EQ(bytes.size(), 8 + 12 + 8 * 7 + 8 * 5 + 4 * 8 * (7 + 5));
  EXPECT_EQ(std::memcmp(bytes.data(), kEmbeddingMagic, 8), 0);
  const auto back = parse_embeddings(bytes);
  EXPECT_EQ(back.image_ids(), store.image_ids());
  EXPECT_EQ(back.sample_ids(), store.sample_ids());
  for (std::size_t r = 0; r < 7; ++r) {
    EXPECT_TRUE(std::equal(back.image_vector(r).begin(), back.image_vector(r).end(),
                           store.image_vector(r).begin()));
  }
  testing::TempDir dir;
  save_embeddings(store, dir.path() / "e.bin");
  EXPECT_EQ(testing::read_bytes(dir.path() / "e.bin"), bytes);
  EXPECT_EQ(load_embeddings(dir.path() / "e.bin").text_count(), 5u);
}

TEST(EmbeddingStore, LittleEndianHeader) {
  const auto bytes = serialize_embeddings(orthonormal_store());
  EXPECT_EQ(static_cast<int>(bytes[8]), 3);   // dim
  EXPECT_EQ(static_cast<int>(bytes[9]), 0);
  EXPECT_EQ(static_cast<int>(bytes[12]), 3);  // n_images
  EXPECT_EQ(static_cast<int>(bytes[16]), 2);  // n_texts
  EXPECT_EQ(static_cast<int>(bytes[20]), 10); // first image id, low byte
}

TEST(EmbeddingStore, BadMagic) {
  auto bytes = serialize_embeddings(orthonormal_store());
  bytes[0] = std::byte{'X'};
  EXPECT_THROW(parse_embeddings(bytes), EmbeddingFormatError);
}

TEST(EmbeddingStore, Truncated) {
  const auto bytes = serialize_embeddings(orthonormal_store());
  for (std::size_t cut : {std::size_t{4}, std::size_t{15}, bytes.size() - 1}) {
    EXPECT_THROW(parse_embeddings(std::span(bytes.data(), cut)), EmbeddingFormatError) << cut;
  }
}

TEST(EmbeddingStore, TrailingBytes) {
  auto bytes = serialize_embeddings(orthonormal_store());
  bytes.push_back(std::byte{0});
  EXPECT_THROW(parse_embeddings(bytes), EmbeddingFormatError);
}

TEST(EmbeddingStore, NonUnitRowReportsRow) {
  std::vector<float> images{1, 0, 0, 0, 1, 0, 0, 0, 1.001f};
  try {
    EmbeddingStore(3, {1, 2, 3}, std::move(images), {}, {});
    FAIL() << "expected EmbeddingValidationError";
  } catch (const EmbeddingValidationError& e) {
    EXPECT_EQ(e.row(), 2u);
  }
  // Within tolerance is accepted.
  EXPECT_NO_THROW(EmbeddingStore(3, {1}, {1.000004f, 0, 0}, {}, {}));
}

TEST(EmbeddingStore, DuplicateIdsRejected) {
  EXPECT_THROW(EmbeddingStore(1, {4, 4}, {1, 1}, {}, {}), EmbeddingValidationError);
  EXPECT_THROW(EmbeddingStore(1, {}, {}, {2, 2}, {1, -1}), EmbeddingValidationError);
}

TEST(EmbeddingStore, LookupMiss) {
  const auto store = orthonormal_store();
  EXPECT_THROW(store.image_row(11), EmbeddingLookupError);
  EXPECT_THROW(text_to_image_scores(store, 5), EmbeddingLookupError);
}

TEST(EmbeddingStore, CoverageReport) {
  Dataset ds;
  ds.images.push_back({10, {}, "a", 1, 1});
  ds.images.push_back({99, {}, "b", 1, 1});
  ReferringSample s;
  s.sample_id = 1;
  ds.samples.push_back(s);
  s.sample_id = 7;
  ds.samples.push_back(s);
  const auto report = check_coverage(orthonormal_store(), ds);
  EXPECT_FALSE(report.complete());
  EXPECT_EQ(report.missing_images, std::vector<ImageId>{99});
  EXPECT_EQ(report.missing_texts, std::vector<SampleId>{7});
}

}  // namespace
}  // namespace nemo
