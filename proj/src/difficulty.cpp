#include "nemo/difficulty.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iterator>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include "nemo/mosaic.hpp"

namespace nemo {

using nlohmann::json;

double box_iou(const BoxF& a, const BoxF& b) {
  const double ix = std::max(0.0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
  const double iy = std::max(0.0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
  const double inter = ix * iy;
  const double uni = a.w * a.h + b.w * b.h - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

std::vector<DetectionRecord> parse_detections(std::string_view json_text) {
  json root;
  try {
    root = json::parse(json_text.begin(), json_text.end());
  } catch (const json::parse_error& e) {
    throw DatasetParseError(e.what(), e.byte);
  }
  std::vector<DetectionRecord> out;
  for (const auto& d : root) {
    DetectionRecord r;
    r.image_id = d.at("image_id").get<ImageId>();
    r.category_id = d.at("category_id").get<int>();
    const auto& b = d.at("bbox");
    r.bbox = {b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(), b.at(3).get<double>()};
    r.score = d.value("score", 1.0);
    if (!(r.score >= 0.0 && r.score <= 1.0)) {
      throw std::invalid_argument("detection score outside [0, 1] for image " + std::to_string(r.image_id));
    }
    out.push_back(r);
  }
  return out;
}

std::vector<DetectionRecord> load_detections(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open detections " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_detections(text);
}

NegativeObjectCount count_negative_objects(const ReferringSample& sample,
                                           std::span<const DetectionRecord> detections,
                                           const NegativeObjectOptions& options) {
  const BoxF target{static_cast<double>(sample.bbox.x), static_cast<double>(sample.bbox.y),
                    static_cast<double>(sample.bbox.w), static_cast<double>(sample.bbox.h)};
  bool any = false;
  std::vector<double> same_class_iou;
  for (const auto& d : detections) {
    if (d.image_id != sample.image_id || d.score < options.min_score) continue;
    any = true;
    if (d.category_id == sample.category_id) same_class_iou.push_back(box_iou(d.bbox, target));
  }
  if (!any) return {0, true};

  auto best = std::max_element(same_class_iou.begin(), same_class_iou.end());
  if (best != same_class_iou.end() && *best >= options.target_iou_floor) same_class_iou.erase(best);
  const auto n = std::count_if(same_class_iou.begin(), same_class_iou.end(),
                               [&](double iou) { return iou < options.distinct_iou; });
  return {static_cast<int>(n), false};
}

std::size_t expression_length(std::string_view expression) {
  std::size_t n = 0;
  bool in_token = false;
  for (char c : expression) {
    const bool space = std::isspace(static_cast<unsigned char>(c)) != 0;
    if (!space && !in_token) ++n;
    in_token = !space;
  }
  return n;
}

std::size_t LengthHistogram::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
}

std::size_t LengthHistogram::bin_of(std::size_t length) {
  if (length >= 1 && length <= 5) return 0;
  if (length >= 6 && length <= 7) return 1;
  if (length >= 8 && length <= 10) return 2;
  if (length >= 11 && length <= 20) return 3;
  return 4;
}

LengthHistogram bin_by_sentence_length(std::span<const ReferringSample> samples) {
  LengthHistogram h;
  for (const auto& s : samples) ++h.counts[LengthHistogram::bin_of(expression_length(s.expression))];
  return h;
}

CorpusStats corpus_stats(const Dataset& dataset) {
  CorpusStats stats;
  stats.n_images = dataset.images.size();
  stats.n_expressions = dataset.samples.size();
  if (dataset.samples.empty()) return stats;

  std::map<std::pair<ImageId, int>, std::set<std::uint64_t>> objects;
  std::size_t tokens = 0;
  for (const auto& s : dataset.samples) {
    objects[{s.image_id, s.category_id}].insert(s.annotation_id);
    tokens += expression_length(s.expression);
  }
  std::size_t object_sum = 0;
  for (const auto& s : dataset.samples) object_sum += objects[{s.image_id, s.category_id}].size();
  const auto n = static_cast<double>(dataset.samples.size());
  stats.mean_query_length = static_cast<double>(tokens) / n;
  stats.mean_objects_per_query = static_cast<double>(object_sum) / n;
  return stats;
}

std::set<std::string> detect_positional_keywords(std::string_view expression) {
  const KeywordMatch m = PositionalConstraintTable::match(expression);
  std::set<std::string> out(m.constraining.begin(), m.constraining.end());
  out.insert(m.unmapped.begin(), m.unmapped.end());
  return out;
}

std::vector<int> decile_bins(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<int> bins(values.size());
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    bins[order[rank]] = static_cast<int>(rank * 10 / order.size());
  }
  return bins;
}

std::vector<DifficultyProfile> profile_samples(const Dataset& dataset,
                                               std::span<const DetectionRecord> detections,
                                               const NegativeObjectOptions& options) {
  std::map<ImageId, std::vector<DetectionRecord>> by_image;
  for (const auto& d : detections) by_image[d.image_id].push_back(d);
  const std::vector<DetectionRecord> none;

  std::vector<DifficultyProfile> out;
  out.reserve(dataset.samples.size());
  std::vector<double> fractions;
  for (const auto& s : dataset.samples) {
    auto it = by_image.find(s.image_id);
    const auto& dets = it == by_image.end() ? none : it->second;
    const auto neg = count_negative_objects(s, dets, options);
    const Bitmap mask = decode_mask(s.mask);
    DifficultyProfile p;
    p.sample_id = s.sample_id;
    p.negative_object_count = neg.count;
    p.no_detections = neg.no_detections;
    p.target_area_fraction = mask.size() ? static_cast<double>(mask.count()) / static_cast<double>(mask.size()) : 0.0;
    p.expression_length = expression_length(s.expression);
    p.has_positional_keyword = !detect_positional_keywords(s.expression).empty();
    fractions.push_back(p.target_area_fraction);
    out.push_back(p);
  }
  const auto bins = decile_bins(fractions);
  for (std::size_t i = 0; i < out.size(); ++i) out[i].scale_bin = bins[i];
  return out;
}

void write_profiles_csv(std::ostream& out, std::span<const DifficultyProfile> profiles) {
  out << "sample_id,negative_object_count,no_detections,target_area_fraction,expression_length,"
         "has_positional_keyword,scale_bin\n";
  for (const auto& p : profiles) {
    std::ostringstream frac;
    frac.precision(8);
    frac << p.target_area_fraction;
    out << p.sample_id << ',' << p.negative_object_count << ',' << (p.no_detections ? 1 : 0) << ','
        << frac.str() << ',' << p.expression_length << ',' << (p.has_positional_keyword ? 1 : 0) << ','
        << p.scale_bin << '\n';
  }
}

json summarize(const Dataset& dataset, std::span<const DifficultyProfile> profiles,
               const NegativeObjectOptions& options) {
  const CorpusStats stats = corpus_stats(dataset);
  const LengthHistogram hist = bin_by_sentence_length(dataset.samples);

  json lengths = json::object();
  for (std::size_t b = 0; b < hist.counts.size(); ++b) lengths[std::string(LengthHistogram::kLabels[b])] = hist.counts[b];

  std::map<int, std::size_t> neg_hist;
  std::size_t positional = 0, missing_dets = 0;
  std::array<std::pair<double, double>, 10> scale_ranges;
  scale_ranges.fill({1.0, 0.0});
  std::array<std::size_t, 10> scale_counts{};
  for (const auto& p : profiles) {
    ++neg_hist[p.negative_object_count];
    positional += p.has_positional_keyword ? 1 : 0;
    missing_dets += p.no_detections ? 1 : 0;
    auto& r = scale_ranges[p.scale_bin];
    r.first = std::min(r.first, p.target_area_fraction);
    r.second = std::max(r.second, p.target_area_fraction);
    ++scale_counts[p.scale_bin];
  }
  json neg = json::object();
  for (const auto& [k, v] : neg_hist) neg[std::to_string(k)] = v;
  json scales = json::array();
  for (std::size_t b = 0; b < 10; ++b) {
    if (!scale_counts[b]) continue;
    scales.push_back({{"bin", b}, {"count", scale_counts[b]}, {"min_area_fraction", scale_ranges[b].first},
                      {"max_area_fraction", scale_ranges[b].second}});
  }
  return {{"corpus",
           {{"images", stats.n_images},
            {"expressions", stats.n_expressions},
            {"mean_query_length", stats.mean_query_length},
            {"mean_objects_per_query", stats.mean_objects_per_query}}},
          {"sentence_length_bins", lengths},
          {"negative_object_counts", neg},
          {"images_without_detections", missing_dets},
          {"object_scale_deciles", scales},
          {"positional_keyword_split", {{"with", positional}, {"without", profiles.size() - positional}}},
          {"negative_object_criteria",
           {{"target_iou_floor", options.target_iou_floor}, {"distinct_iou", options.distinct_iou},
            {"min_score", options.min_score}}}};
}

std::string length_table_markdown(const LengthHistogram& histogram) {
  std::ostringstream out;
  out << "| Length of T |";
  for (std::size_t b = 0; b < 4; ++b) out << ' ' << LengthHistogram::kLabels[b] << " |";
  out << " other |\n|---|---|---|---|---|---|\n| expressions |";
  for (std::size_t b = 0; b < histogram.counts.size(); ++b) out << ' ' << histogram.counts[b] << " |";
  out << '\n';
  return out.str();
}

}  // namespace nemo
