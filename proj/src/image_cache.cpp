#include "nemo/image_cache.hpp"

#include <mutex>

#include <opencv2/imgcodecs.hpp>

namespace nemo {

cv::Mat read_image(const ImageRecord& record) {
  cv::Mat img = cv::imread(record.file.string(), cv::IMREAD_COLOR);
  if (img.empty()) {
    throw ImageLoadError(record.image_id, "cannot decode image " + std::to_string(record.image_id) +
                                              " (" + record.file.string() + ")");
  }
  if (img.rows != record.height || img.cols != record.width) {
    throw ImageLoadError(record.image_id,
                         "image " + std::to_string(record.image_id) + " is " + std::to_string(img.cols) +
                             "x" + std::to_string(img.rows) + ", annotation says " +
                             std::to_string(record.width) + "x" + std::to_string(record.height));
  }
  return img;
}

std::shared_ptr<const cv::Mat> ImageCache::get(ImageId id) const {
  {
    std::shared_lock lock(mutex_);
    auto it = entries_.find(id);
    if (it != entries_.end()) return it->second;
  }
  const ImageRecord* record = dataset_.find_image(id);
  if (!record) throw ImageLoadError(id, "image " + std::to_string(id) + " is not in the dataset");
  auto decoded = std::make_shared<const cv::Mat>(read_image(*record));

  std::unique_lock lock(mutex_);
  if (entries_.size() >= capacity_) entries_.clear();
  auto [it, inserted] = entries_.emplace(id, decoded);
  return it->second;
}

}  // namespace nemo
