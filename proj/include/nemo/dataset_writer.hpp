#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>
#include <opencv2/core.hpp>

#include "nemo/dataset.hpp"
#include "nemo/mosaic.hpp"

namespace nemo {

class WriteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr const char* kManifestName = "manifest.json";
inline constexpr const char* kAnnotationsName = "annotations.json";
inline constexpr const char* kPartialMarkerName = "PARTIAL";

// PNG bytes with fixed encoder settings, so equal pixels give equal bytes.
std::vector<std::byte> encode_png(const cv::Mat& image);

nlohmann::json rle_to_json(const Rle& rle);

// One output annotation plus the image entry it refers to.
struct OutputRecord {
  nlohmann::json image;
  nlohmann::json annotation;
};

OutputRecord augmented_record(const AugmentedSample& sample, ImageId image_id,
                              std::uint64_t annotation_id, const std::string& image_file);
OutputRecord passthrough_record(const ReferringSample& sample, const ImageRecord& image,
                                std::uint64_t annotation_id, const std::string& image_file);

// Accumulates an output dataset. Image files may be written from several
// threads; records are appended in sample order by the caller. Any failure
// leaves a PARTIAL marker in the output directory.
class DatasetWriter {
 public:
  explicit DatasetWriter(std::filesystem::path out_dir);

  const std::filesystem::path& out_dir() const { return out_dir_; }

  // Thread-safe. `relative` is relative to out_dir.
  void write_file(const std::string& relative, std::span<const std::byte> bytes);
  void copy_file(const std::string& relative, const std::filesystem::path& source);

  // Not thread-safe; call in output order. Image entries are emitted once
  // per image id.
  void append(OutputRecord record);
  void add_augmented(const AugmentedSample& sample, ImageId image_id, std::uint64_t annotation_id,
                     const std::string& image_file);
  void add_passthrough(const ReferringSample& sample, const ImageRecord& image,
                       std::uint64_t annotation_id, const std::string& image_file);

  // Writes annotations.json and manifest.json; returns the manifest path.
  std::filesystem::path finish();

  // Records an error marker; used when a failure happens outside the writer.
  void mark_partial(const std::string& reason) const;

 private:
  std::filesystem::path out_dir_;
  std::mutex mutex_;
  std::map<std::string, std::pair<std::string, std::uintmax_t>> files_;  // path -> (sha256, bytes)
  nlohmann::json images_ = nlohmann::json::array();
  nlohmann::json annotations_ = nlohmann::json::array();
  std::map<ImageId, bool> emitted_images_;
};

// Writes augmented samples only: image ids and annotation ids are 1..N.
std::filesystem::path write_augmented(std::span<const AugmentedSample> samples,
                                      const std::filesystem::path& out_dir);

}  // namespace nemo
