#include "nemo/dataset.hpp"

#include <fstream>
#include <iterator>

#include <json.hpp>

namespace nemo {

using nlohmann::json;

const ImageRecord* Dataset::find_image(ImageId id) const {
  auto it = image_index_.find(id);
  return it == image_index_.end() ? nullptr : &images[it->second];
}

const ImageRecord& Dataset::image(ImageId id) const {
  const ImageRecord* rec = find_image(id);
  if (!rec) throw std::out_of_range("unknown image_id " + std::to_string(id));
  return *rec;
}

void Dataset::reindex() {
  image_index_.clear();
  image_index_.reserve(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) image_index_.emplace(images[i].image_id, i);
}

namespace {

SegmentationMask parse_segmentation(const json& seg, const ImageRecord& image, std::uint64_t ann_id) {
  auto bad = [&](const std::string& why) {
    return DatasetIntegrityError("annotation " + std::to_string(ann_id) + ": " + why, {ann_id});
  };
  if (seg.is_object()) {
    const auto& size = seg.at("size");
    Rle rle;
    rle.height = size.at(0).get<int>();
    rle.width = size.at(1).get<int>();
    const auto& counts = seg.at("counts");
    if (counts.is_string()) {
      rle.counts = rle_counts_from_string(counts.get<std::string>());
    } else {
      rle.counts = counts.get<std::vector<std::uint32_t>>();
    }
    if (rle.height != image.height || rle.width != image.width) {
      throw bad("mask size differs from image size");
    }
    return SegmentationMask(std::move(rle));
  }
  if (seg.is_array()) {
    Polygons poly{image.height, image.width, seg.get<std::vector<std::vector<double>>>()};
    return SegmentationMask(encode_rle(rasterize_polygons(poly)));
  }
  throw bad("unsupported segmentation payload");
}

}  // namespace

Dataset parse_dataset(std::string_view json_text, const LoadOptions& options) {
  json root;
  try {
    root = json::parse(json_text.begin(), json_text.end());
  } catch (const json::parse_error& e) {
    throw DatasetParseError(e.what(), e.byte);
  }

  Dataset ds;
  try {
    for (const auto& img : root.value("images", json::array())) {
      ImageRecord rec;
      rec.image_id = img.at("id").get<ImageId>();
      rec.file_name = img.value("file_name", std::string{});
      rec.file = options.image_root / rec.file_name;
      rec.height = img.at("height").get<int>();
      rec.width = img.at("width").get<int>();
      if (rec.height <= 0 || rec.width <= 0) {
        throw DatasetIntegrityError("image " + std::to_string(rec.image_id) + " has non-positive size",
                                    {rec.image_id});
      }
      ds.images.push_back(std::move(rec));
    }
  } catch (const json::exception& e) {
    throw DatasetParseError(std::string("bad image record: ") + e.what(), 0);
  }
  ds.reindex();
  if (ds.images.size() != ds.image_count_indexed()) {
    std::vector<std::uint64_t> dupes;
    std::unordered_map<ImageId, int> seen;
    for (const auto& img : ds.images)
      if (++seen[img.image_id] == 2) dupes.push_back(img.image_id);
    throw DatasetIntegrityError("duplicate image ids", dupes);
  }

  if (options.require_image_files) {
    std::vector<std::uint64_t> missing;
    for (const auto& img : ds.images)
      if (!std::filesystem::exists(img.file)) missing.push_back(img.image_id);
    if (!missing.empty()) {
      throw DatasetIntegrityError(std::to_string(missing.size()) + " image file(s) missing", missing);
    }
  }

  std::vector<std::uint64_t> dangling;
  SampleId ordinal = 0;
  try {
    for (const auto& ann : root.value("annotations", json::array())) {
      const auto ann_id = ann.at("id").get<std::uint64_t>();
      const auto image_id = ann.at("image_id").get<ImageId>();
      const ImageRecord* image = ds.find_image(image_id);
      const auto expressions = ann.value("expressions", std::vector<std::string>{});
      if (!image) {
        dangling.push_back(image_id);
        ordinal += expressions.size();
        continue;
      }
      std::vector<SampleId> ids;
      if (ann.contains("expression_ids")) {
        ids = ann.at("expression_ids").get<std::vector<SampleId>>();
        if (ids.size() != expressions.size()) {
          throw DatasetIntegrityError(
              "annotation " + std::to_string(ann_id) + ": expression_ids length mismatch", {ann_id});
        }
      }
      SegmentationMask mask = parse_segmentation(ann.at("segmentation"), *image, ann_id);
      const Box box = decode_mask(mask).bbox();
      const int category = ann.value("category_id", 0);
      for (std::size_t e = 0; e < expressions.size(); ++e) {
        ReferringSample s;
        s.sample_id = ids.empty() ? ordinal : ids[e];
        s.image_id = image_id;
        s.annotation_id = ann_id;
        s.expression = expressions[e];
        s.mask = mask;
        s.category_id = category;
        s.bbox = box;
        ds.samples.push_back(std::move(s));
        ++ordinal;
      }
    }
  } catch (const json::exception& e) {
    throw DatasetParseError(std::string("bad annotation record: ") + e.what(), 0);
  } catch (const MaskError& e) {
    throw DatasetIntegrityError(e.what(), {});
  }
  if (!dangling.empty()) {
    throw DatasetIntegrityError(
        std::to_string(dangling.size()) + " annotation(s) reference unknown image ids", dangling);
  }
  std::unordered_map<SampleId, int> seen_samples;
  std::vector<std::uint64_t> dupes;
  for (const auto& s : ds.samples)
    if (++seen_samples[s.sample_id] == 2) dupes.push_back(s.sample_id);
  if (!dupes.empty()) throw DatasetIntegrityError("duplicate sample ids", dupes);
  return ds;
}

Dataset load_dataset(const std::filesystem::path& path, const LoadOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dataset " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  LoadOptions resolved = options;
  if (resolved.image_root.empty()) resolved.image_root = path.parent_path();
  return parse_dataset(text, resolved);
}

}  // namespace nemo
