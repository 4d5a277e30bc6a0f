#pragma once

#include <filesystem>
#include <memory>
#include <shared_mutex>
#include <stdexcept>
#include <unordered_map>

#include <opencv2/core.hpp>

#include "nemo/dataset.hpp"

namespace nemo {

class ImageLoadError : public std::runtime_error {
 public:
  ImageLoadError(ImageId id, const std::string& what) : std::runtime_error(what), id_(id) {}
  ImageId image_id() const { return id_; }

 private:
  ImageId id_;
};

// Decodes dataset images on demand as 8-bit BGR and keeps up to `capacity`
// of them. Safe for concurrent readers. Eviction is wholesale when the cache
// fills, so which images stay resident never affects pixel values.
class ImageCache {
 public:
  explicit ImageCache(const Dataset& dataset, std::size_t capacity = 256)
      : dataset_(dataset), capacity_(capacity) {}

  std::shared_ptr<const cv::Mat> get(ImageId id) const;

 private:
  const Dataset& dataset_;
  std::size_t capacity_;
  mutable std::shared_mutex mutex_;
  mutable std::unordered_map<ImageId, std::shared_ptr<const cv::Mat>> entries_;
};

// Reads an image as 8-bit 3-channel BGR; throws ImageLoadError.
cv::Mat read_image(const ImageRecord& record);

}  // namespace nemo
