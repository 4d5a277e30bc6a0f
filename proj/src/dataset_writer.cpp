#include "nemo/dataset_writer.hpp"

#include <cstring>
#include <fstream>

#include <opencv2/imgcodecs.hpp>

#include "nemo/digest.hpp"

namespace nemo {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<std::byte> encode_png(const cv::Mat& image) {
  std::vector<uchar> buf;
  const std::vector<int> params{cv::IMWRITE_PNG_COMPRESSION, 3, cv::IMWRITE_PNG_STRATEGY,
                                cv::IMWRITE_PNG_STRATEGY_DEFAULT};
  if (!cv::imencode(".png", image, buf, params)) throw WriteError("PNG encoding failed");
  std::vector<std::byte> out(buf.size());
  std::memcpy(out.data(), buf.data(), buf.size());
  return out;
}

json rle_to_json(const Rle& rle) {
  return json{{"size", {rle.height, rle.width}}, {"counts", rle.counts}};
}

DatasetWriter::DatasetWriter(fs::path out_dir) : out_dir_(std::move(out_dir)) {
  std::error_code ec;
  fs::create_directories(out_dir_ / "images", ec);
  if (ec) {
    throw WriteError("cannot create output directory " + out_dir_.string() + ": " + ec.message());
  }
  fs::remove(out_dir_ / kPartialMarkerName, ec);
}

void DatasetWriter::mark_partial(const std::string& reason) const {
  std::ofstream marker(out_dir_ / kPartialMarkerName, std::ios::trunc);
  marker << reason << '\n';
}

void DatasetWriter::write_file(const std::string& relative, std::span<const std::byte> bytes) {
  const fs::path target = out_dir_ / relative;
  std::error_code ec;
  fs::create_directories(target.parent_path(), ec);
  std::ofstream out(target, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  out.close();
  if (!out) {
    mark_partial("failed writing " + relative);
    throw WriteError("failed writing " + target.string());
  }
  std::string digest = sha256_hex(bytes);
  std::lock_guard lock(mutex_);
  files_[relative] = {std::move(digest), bytes.size()};
}

void DatasetWriter::copy_file(const std::string& relative, const fs::path& source) {
  const fs::path target = out_dir_ / relative;
  std::error_code ec;
  fs::copy_file(source, target, fs::copy_options::overwrite_existing, ec);
  if (ec) {
    mark_partial("failed copying " + source.string());
    throw WriteError("failed copying " + source.string() + " to " + target.string() + ": " + ec.message());
  }
  std::string digest = sha256_file(target);
  const auto size = fs::file_size(target);
  std::lock_guard lock(mutex_);
  files_[relative] = {std::move(digest), size};
}

OutputRecord augmented_record(const AugmentedSample& sample, ImageId image_id,
                              std::uint64_t annotation_id, const std::string& image_file) {
  OutputRecord rec;
  rec.image = {{"id", image_id},
               {"file_name", image_file},
               {"height", sample.image.rows},
               {"width", sample.image.cols}};
  const Box box = sample.mask.bbox();
  json provenance = sample.provenance.config.is_object() ? sample.provenance.config : json::object();
  provenance["augmented"] = true;
  provenance["source_sample_id"] = sample.provenance.source_sample_id;
  provenance["source_image_id"] = sample.provenance.source_image_id;
  provenance["negative_image_ids"] = sample.provenance.negative_ids;
  provenance["quadrant"] = sample.provenance.positive_cell;
  provenance["grid"] = to_string(sample.plan.grid);
  provenance["cross_point"] = {sample.plan.cross_y, sample.plan.cross_x};
  provenance["seed"] = sample.provenance.seed;
  provenance["constraint_fallback"] = sample.plan.constraint_fallback;
  provenance["positional_keywords"] = sample.plan.positional_keywords;
  rec.annotation = {{"id", annotation_id},
                    {"image_id", image_id},
                    {"category_id", sample.category_id},
                    {"bbox", {box.x, box.y, box.w, box.h}},
                    {"area", sample.mask.count()},
                    {"iscrowd", 0},
                    {"segmentation", rle_to_json(encode_rle(sample.mask))},
                    {"expressions", {sample.expression}},
                    {"expression_ids", {sample.sample_id}},
                    {"provenance", std::move(provenance)}};
  return rec;
}

OutputRecord passthrough_record(const ReferringSample& sample, const ImageRecord& image,
                                std::uint64_t annotation_id, const std::string& image_file) {
  OutputRecord rec;
  rec.image = {{"id", image.image_id},
               {"file_name", image_file},
               {"height", image.height},
               {"width", image.width}};
  const Bitmap mask = decode_mask(sample.mask);
  rec.annotation = {{"id", annotation_id},
                    {"image_id", image.image_id},
                    {"category_id", sample.category_id},
                    {"bbox", {sample.bbox.x, sample.bbox.y, sample.bbox.w, sample.bbox.h}},
                    {"area", mask.count()},
                    {"iscrowd", 0},
                    {"segmentation", rle_to_json(encode_rle(mask))},
                    {"expressions", {sample.expression}},
                    {"expression_ids", {sample.sample_id}},
                    {"provenance", {{"augmented", false},
                                    {"source_sample_id", sample.sample_id},
                                    {"source_image_id", sample.image_id}}}};
  return rec;
}

void DatasetWriter::append(OutputRecord record) {
  const auto id = record.image.at("id").get<ImageId>();
  if (emitted_images_.emplace(id, true).second) images_.push_back(std::move(record.image));
  annotations_.push_back(std::move(record.annotation));
}

void DatasetWriter::add_augmented(const AugmentedSample& sample, ImageId image_id,
                                  std::uint64_t annotation_id, const std::string& image_file) {
  append(augmented_record(sample, image_id, annotation_id, image_file));
}

void DatasetWriter::add_passthrough(const ReferringSample& sample, const ImageRecord& image,
                                    std::uint64_t annotation_id, const std::string& image_file) {
  append(passthrough_record(sample, image, annotation_id, image_file));
}

fs::path DatasetWriter::finish() {
  const json annotations{{"images", images_}, {"annotations", annotations_}};
  const std::string text = annotations.dump(1);
  write_file(kAnnotationsName, std::as_bytes(std::span(text.data(), text.size())));

  json manifest;
  manifest["format"] = "nemo-forge-manifest/1";
  json files = json::array();
  {
    std::lock_guard lock(mutex_);
    for (const auto& [path, entry] : files_) {
      if (path == kAnnotationsName) {
        manifest["annotations"] = {{"path", path}, {"sha256", entry.first}, {"bytes", entry.second}};
      } else {
        files.push_back({{"path", path}, {"sha256", entry.first}, {"bytes", entry.second}});
      }
    }
  }
  manifest["files"] = std::move(files);
  const fs::path manifest_path = out_dir_ / kManifestName;
  std::ofstream out(manifest_path, std::ios::trunc);
  out << manifest.dump(2) << '\n';
  out.close();
  if (!out) {
    mark_partial("failed writing manifest");
    throw WriteError("failed writing " + manifest_path.string());
  }
  return manifest_path;
}

fs::path write_augmented(std::span<const AugmentedSample> samples, const fs::path& out_dir) {
  DatasetWriter writer(out_dir);
  std::uint64_t next_id = 1;
  for (const auto& s : samples) {
    const std::string file = "images/aug_" + std::to_string(s.sample_id) + ".png";
    writer.write_file(file, encode_png(s.image));
    writer.add_augmented(s, next_id, next_id, file);
    ++next_id;
  }
  return writer.finish();
}

}  // namespace nemo
