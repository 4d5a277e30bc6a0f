#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "nemo/mask.hpp"

namespace nemo {

using ImageId = std::uint64_t;
using SampleId = std::uint64_t;

class DatasetParseError : public std::runtime_error {
 public:
  DatasetParseError(const std::string& what, std::size_t byte_offset)
      : std::runtime_error(what), byte_offset_(byte_offset) {}
  std::size_t byte_offset() const { return byte_offset_; }

 private:
  std::size_t byte_offset_;
};

class DatasetIntegrityError : public std::runtime_error {
 public:
  DatasetIntegrityError(const std::string& what, std::vector<std::uint64_t> offenders)
      : std::runtime_error(what), offenders_(std::move(offenders)) {}
  const std::vector<std::uint64_t>& offenders() const { return offenders_; }

 private:
  std::vector<std::uint64_t> offenders_;
};

struct ImageRecord {
  ImageId image_id = 0;
  std::filesystem::path file;  // absolute or relative to the working directory
  std::string file_name;       // as written in the annotation file
  int height = 0;
  int width = 0;
};

struct ReferringSample {
  SampleId sample_id = 0;
  ImageId image_id = 0;
  std::uint64_t annotation_id = 0;
  std::string expression;
  SegmentationMask mask;  // RLE after load; polygons are rasterized on ingest
  int category_id = 0;
  Box bbox;               // tight box of the mask foreground
};

struct Dataset {
  std::vector<ImageRecord> images;
  std::vector<ReferringSample> samples;

  const ImageRecord& image(ImageId id) const;
  const ImageRecord* find_image(ImageId id) const;
  // Rebuilds the id -> index table; call after mutating `images`.
  void reindex();
  std::size_t image_count_indexed() const { return image_index_.size(); }

 private:
  std::unordered_map<ImageId, std::size_t> image_index_;
};

struct LoadOptions {
  // Directory image file_names are resolved against. Defaults to the
  // annotation file's parent directory.
  std::filesystem::path image_root;
  bool require_image_files = true;
};

// Parses a COCO-style annotation file whose annotations carry an
// `expressions` array. Each (annotation, expression) pair becomes one sample,
// in file order. Sample ids come from an optional parallel `expression_ids`
// array, else the pair's ordinal.
Dataset load_dataset(const std::filesystem::path& path, const LoadOptions& options = {});
Dataset parse_dataset(std::string_view json_text, const LoadOptions& options);

}  // namespace nemo
