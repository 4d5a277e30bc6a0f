#include "fixtures.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <iterator>

#include <json.hpp>
#include <opencv2/imgcodecs.hpp>

#include "nemo/dataset_writer.hpp"

namespace nemo::testing {

namespace fs = std::filesystem;
using nlohmann::json;

TempDir::TempDir(const std::string& tag) {
  std::random_device rd;
  const auto base = fs::temp_directory_path();
  for (int attempt = 0; attempt < 100; ++attempt) {
    auto candidate = base / (tag + "-" + std::to_string(rd()) + std::to_string(rd()));
    if (fs::create_directories(candidate)) {
      path_ = candidate;
      return;
    }
  }
  throw std::runtime_error("cannot create a temporary directory");
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

std::vector<float> random_unit_rows(std::size_t rows, std::uint32_t dim, std::mt19937_64& gen, float scale) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<float> out(rows * dim);
  for (std::size_t r = 0; r < rows; ++r) {
    std::vector<double> v(dim);
    double sq = 0;
    for (auto& x : v) {
      x = normal(gen);
      sq += x * x;
    }
    const double norm = std::sqrt(sq);
    for (std::uint32_t d = 0; d < dim; ++d) out[r * dim + d] = static_cast<float>(v[d] / norm) * scale;
  }
  return out;
}

EmbeddingStore random_store(std::size_t n_images, std::size_t n_texts, std::uint32_t dim, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::vector<ImageId> image_ids(n_images);
  for (std::size_t i = 0; i < n_images; ++i) image_ids[i] = i + 1;
  std::vector<SampleId> sample_ids(n_texts);
  for (std::size_t i = 0; i < n_texts; ++i) sample_ids[i] = i;
  auto images = random_unit_rows(n_images, dim, gen);
  auto texts = random_unit_rows(n_texts, dim, gen);
  return EmbeddingStore(dim, std::move(image_ids), std::move(images), std::move(sample_ids), std::move(texts));
}

Bitmap random_bitmap(int height, int width, double density, std::mt19937_64& gen) {
  std::bernoulli_distribution on(density);
  Bitmap b(height, width);
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c) b.set(r, c, on(gen));
  return b;
}

Bitmap random_blob(int height, int width, std::mt19937_64& gen) {
  std::uniform_int_distribution<int> ry(0, height - 1), rx(0, width - 1);
  int y0 = ry(gen), y1 = ry(gen), x0 = rx(gen), x1 = rx(gen);
  if (y0 > y1) std::swap(y0, y1);
  if (x0 > x1) std::swap(x0, x1);
  Bitmap b(height, width);
  for (int r = y0; r <= y1; ++r)
    for (int c = x0; c <= x1; ++c) b.set(r, c, true);
  return b;
}

namespace {

constexpr std::array<const char*, 8> kNouns{"cup", "zebra", "horse", "man", "dog", "chair", "car", "plate"};
constexpr std::array<const char*, 6> kAdjectives{"red", "small", "striped", "old", "wooden", "shiny"};
constexpr std::array<const char*, 10> kPlaces{"left", "right", "top", "bottom", "high", "low", "above",
                                              "below", "corner", "middle"};

std::string make_expression(std::mt19937_64& gen) {
  std::uniform_int_distribution<std::size_t> noun(0, kNouns.size() - 1), adj(0, kAdjectives.size() - 1),
      place(0, kPlaces.size() - 1), shape(0, 3);
  switch (shape(gen)) {
    case 0: return std::string("the ") + kAdjectives[adj(gen)] + " " + kNouns[noun(gen)];
    case 1: return std::string(kNouns[noun(gen)]) + " on the " + kPlaces[place(gen)];
    case 2:
      return std::string("a ") + kAdjectives[adj(gen)] + " " + kNouns[noun(gen)] + " next to the " +
             kAdjectives[adj(gen)] + " " + kNouns[noun(gen)] + " near the " + kPlaces[place(gen)];
    default: return kNouns[noun(gen)];
  }
}

}  // namespace

FixturePaths write_synthetic_fixture(const fs::path& dir, const FixtureSpec& fixture_spec) {
  std::mt19937_64 gen(fixture_spec.seed);
  fs::create_directories(dir / "img");
  std::uniform_int_distribution<int> side(fixture_spec.min_side, fixture_spec.max_side);
  std::uniform_int_distribution<int> category(1, 3);
  std::uniform_int_distribution<int> pixel(0, 255);

  json images = json::array(), annotations = json::array();
  std::vector<ImageId> image_ids;
  std::vector<SampleId> sample_ids;
  std::vector<std::size_t> sample_image_row;
  std::uint64_t ann_id = 1;
  SampleId sample_id = 0;
  for (std::size_t i = 0; i < fixture_spec.n_images; ++i) {
    const ImageId id = 100 + i;
    const int h = side(gen), w = side(gen);
    cv::Mat img(h, w, CV_8UC3);
    const cv::Vec3b base(static_cast<uchar>(pixel(gen)), static_cast<uchar>(pixel(gen)), static_cast<uchar>(pixel(gen)));
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c)
        img.at<cv::Vec3b>(r, c) = cv::Vec3b(static_cast<uchar>((base[0] + r * 3) % 256),
                                            static_cast<uchar>((base[1] + c * 5) % 256),
                                            static_cast<uchar>((base[2] + pixel(gen) / 8) % 256));
    const std::string name = "img/" + std::to_string(id) + ".png";
    cv::imwrite((dir / name).string(), img);
    images.push_back({{"id", id}, {"file_name", name}, {"height", h}, {"width", w}});
    image_ids.push_back(id);

    for (std::size_t a = 0; a < fixture_spec.annotations_per_image; ++a) {
      const Bitmap mask = random_blob(h, w, gen);
      const Box box = mask.bbox();
      json exprs = json::array(), ids = json::array();
      for (std::size_t e = 0; e < fixture_spec.expressions_per_annotation; ++e) {
        exprs.push_back(make_expression(gen));
        ids.push_back(sample_id);
        sample_ids.push_back(sample_id++);
        sample_image_row.push_back(i);
      }
      annotations.push_back({{"id", ann_id++},
                             {"image_id", id},
                             {"category_id", category(gen)},
                             {"bbox", {box.x, box.y, box.w, box.h}},
                             {"segmentation", rle_to_json(encode_rle(mask))},
                             {"expressions", exprs},
                             {"expression_ids", ids}});
    }
  }
  FixturePaths paths{dir / "annotations.json", dir / "embeddings.bin"};
  std::ofstream(paths.annotations) << json{{"images", images}, {"annotations", annotations}}.dump(1);

  auto image_rows = random_unit_rows(image_ids.size(), fixture_spec.dim, gen);
  auto noise = random_unit_rows(sample_ids.size(), fixture_spec.dim, gen);
  std::vector<float> text_rows(sample_ids.size() * fixture_spec.dim);
  for (std::size_t s = 0; s < sample_ids.size(); ++s) {
    double sq = 0;
    std::vector<double> v(fixture_spec.dim);
    for (std::uint32_t d = 0; d < fixture_spec.dim; ++d) {
      v[d] = 0.7 * image_rows[sample_image_row[s] * fixture_spec.dim + d] + 0.7 * noise[s * fixture_spec.dim + d];
      sq += v[d] * v[d];
    }
    for (std::uint32_t d = 0; d < fixture_spec.dim; ++d) text_rows[s * fixture_spec.dim + d] = static_cast<float>(v[d] / std::sqrt(sq));
  }
  save_embeddings(EmbeddingStore(fixture_spec.dim, image_ids, std::move(image_rows), sample_ids, std::move(text_rows)),
                  paths.embeddings);
  return paths;
}

std::vector<std::byte> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::vector<std::byte> out(raw.size());
  std::memcpy(out.data(), raw.data(), raw.size());
  return out;
}

}  // namespace nemo::testing
