#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "nemo/dataset.hpp"

namespace nemo {

struct BoxF {
  double x = 0, y = 0, w = 0, h = 0;
};

double box_iou(const BoxF& a, const BoxF& b);

struct DetectionRecord {
  ImageId image_id = 0;
  int category_id = 0;
  BoxF bbox;
  double score = 0.0;
};

// COCO results format: [{"image_id", "category_id", "bbox": [x,y,w,h], "score"}].
std::vector<DetectionRecord> parse_detections(std::string_view json_text);
std::vector<DetectionRecord> load_detections(const std::filesystem::path& path);

struct NegativeObjectOptions {
  // The same-class detection overlapping the target best is the target
  // itself when its IoU reaches this floor.
  double target_iou_floor = 0.5;
  // Remaining same-class detections below this IoU count as distractors.
  double distinct_iou = 0.5;
  double min_score = 0.0;
};

struct NegativeObjectCount {
  int count = 0;
  bool no_detections = false;  // warning: image had no detections at all
};

NegativeObjectCount count_negative_objects(const ReferringSample& sample,
                                           std::span<const DetectionRecord> detections,
                                           const NegativeObjectOptions& options = {});

// Whitespace tokens.
std::size_t expression_length(std::string_view expression);

// Bins 1-5, 6-7, 8-10, 11-20, then an overflow bin for 0 or >20 tokens.
struct LengthHistogram {
  static constexpr std::array<std::string_view, 5> kLabels{"1-5", "6-7", "8-10", "11-20", "other"};
  std::array<std::size_t, 5> counts{};
  std::size_t total() const;
  static std::size_t bin_of(std::size_t length);
};

LengthHistogram bin_by_sentence_length(std::span<const ReferringSample> samples);

struct CorpusStats {
  std::size_t n_images = 0;
  std::size_t n_expressions = 0;
  double mean_query_length = 0.0;
  // Same-category annotations in the referred image, averaged over expressions.
  double mean_objects_per_query = 0.0;
};

CorpusStats corpus_stats(const Dataset& dataset);

// Positional words, lower-cased: top, high, above, left, right, bottom, low,
// below, o'clock, corner.
std::set<std::string> detect_positional_keywords(std::string_view expression);

struct DifficultyProfile {
  SampleId sample_id = 0;
  int negative_object_count = 0;
  bool no_detections = false;
  double target_area_fraction = 0.0;
  std::size_t expression_length = 0;
  bool has_positional_keyword = false;
  int scale_bin = 0;  // decile of target_area_fraction, 0..9
};

std::vector<DifficultyProfile> profile_samples(const Dataset& dataset,
                                               std::span<const DetectionRecord> detections,
                                               const NegativeObjectOptions& options = {});

// Decile bins by rank: each bin holds ~10% of the values. Ties keep input order.
std::vector<int> decile_bins(std::span<const double> values);

void write_profiles_csv(std::ostream& out, std::span<const DifficultyProfile> profiles);
nlohmann::json summarize(const Dataset& dataset, std::span<const DifficultyProfile> profiles,
                         const NegativeObjectOptions& options);
std::string length_table_markdown(const LengthHistogram& histogram);

}  // namespace nemo
