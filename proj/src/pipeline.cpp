#include "nemo/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <optional>
#include <thread>

#include <spdlog/spdlog.h>
#include <opencv2/core.hpp>

#include "nemo/dataset_writer.hpp"
#include "nemo/image_cache.hpp"

namespace nemo {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

void PipelineConfig::validate() const {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must lie in [0, 1]");
  if (worker_count == 0) throw std::invalid_argument("worker_count must be positive");
  mining.validate();
  compositor.validate();
}

json provenance_snapshot(const PipelineConfig& config) {
  json j;
  j["gamma"] = config.gamma;
  j["mode"] = to_string(config.mining.mode);
  j["tau"] = config.mining.tau ? json(*config.mining.tau) : json(nullptr);
  j["tau_t2i"] = config.mining.tau_t2i ? json(*config.mining.tau_t2i) : json(nullptr);
  j["tau_i2i"] = config.mining.tau_i2i ? json(*config.mining.tau_i2i) : json(nullptr);
  j["k"] = config.mining.k;
  j["cross_point_policy"] = to_string(config.compositor.cross_point);
  j["constraints"] = config.compositor.constraints;
  j["master_seed"] = config.master_seed;
  return j;
}

json RunReport::to_json() const {
  json errors_json = json::array();
  for (const auto& e : error_ledger) errors_json.push_back({{"sample_id", e.sample_id}, {"error", e.message}});
  return {{"totals",
           {{"samples", total},
            {"augmented", augmented},
            {"passed_through", passed_through},
            {"pool_too_small", pool_too_small},
            {"errors", errors},
            {"constraint_fallbacks", constraint_fallbacks}}},
          {"timing_seconds",
           {{"wall", wall_seconds}, {"mine", mine_seconds}, {"compose", compose_seconds}, {"write", write_seconds}}},
          {"errors", std::move(errors_json)},
          {"manifest", manifest.string()},
          {"config", config_echo}};
}

bool gate(double gamma, Rng& rng) { return rng.uniform() < gamma; }

namespace {

struct StageTimes {
  double mine = 0, compose = 0, write = 0;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

AugmentedSample augment_timed(const ReferringSample& sample, const EmbeddingStore& store,
                              const PipelineConfig& config, ImageCache& cache, Rng& rng, StageTimes& times) {
  auto t0 = Clock::now();
  const NegativePool pool = build_pool(store, sample, config.mining);
  const std::size_t needed = static_cast<std::size_t>(cell_count(config.compositor.grid) - 1);
  if (pool.pool.size() < needed) throw PoolTooSmall(sample.sample_id, pool.pool.size());
  std::vector<ImageId> negatives;
  if (needed == 3) {
    const auto sel = select_negatives(pool, rng);
    negatives.assign(sel.negatives.begin(), sel.negatives.end());
  } else {
    negatives = select_distinct(pool, needed, rng);
  }
  times.mine += seconds_since(t0);

  t0 = Clock::now();
  const MosaicPlan plan = plan_mosaic(sample, negatives, config.compositor, rng);
  const auto positive = cache.get(sample.image_id);
  std::vector<std::shared_ptr<const cv::Mat>> held;
  std::vector<cv::Mat> negative_images;
  for (ImageId id : plan.negative_ids) {
    std::shared_ptr<const cv::Mat> img;
    try {
      img = cache.get(id);
    } catch (const ImageLoadError& e) {
      throw ComposeError(id, std::string("negative ") + e.what());
    }
    negative_images.push_back(*img);
    held.push_back(std::move(img));
  }
  AugmentedSample out = compose(sample, *positive, negative_images, plan);
  out.provenance.source_sample_id = sample.sample_id;
  out.provenance.source_image_id = sample.image_id;
  out.provenance.negative_ids = plan.negative_ids;
  out.provenance.positive_cell = plan.positive_cell;
  out.provenance.seed = rng.seed();
  out.provenance.config = provenance_snapshot(config);
  times.compose += seconds_since(t0);
  return out;
}

enum class Outcome { kPassThrough, kAugmented, kPoolTooSmall, kError };

struct Slot {
  Outcome outcome = Outcome::kPassThrough;
  std::optional<OutputRecord> record;  // set for kAugmented
  bool constraint_fallback = false;
  std::string error;
};

std::string augmented_file_name(const ReferringSample& s) {
  return "images/aug_" + std::to_string(s.sample_id) + ".png";
}

std::string passthrough_file_name(const ImageRecord& img) {
  return "images/src_" + std::to_string(img.image_id) + img.file.extension().string();
}

}  // namespace

AugmentedSample augment_sample(const ReferringSample& sample, const EmbeddingStore& store,
                               const PipelineConfig& config, ImageCache& cache, Rng& rng) {
  StageTimes ignored;
  return augment_timed(sample, store, config, cache, rng, ignored);
}

RunReport run(const Dataset& dataset, const EmbeddingStore& store, const PipelineConfig& config,
              const RunOptions& options) {
  config.validate();
  const auto started = Clock::now();
  const CoverageReport coverage = check_coverage(store, dataset);
  if (!coverage.complete()) {
    throw std::invalid_argument("embeddings do not cover the dataset: " +
                                std::to_string(coverage.missing_images.size()) + " image(s) and " +
                                std::to_string(coverage.missing_texts.size()) + " expression(s) missing");
  }

  DatasetWriter writer(options.out_dir);
  ImageCache cache(dataset, std::max<std::size_t>(64, 16 * config.worker_count));

  ImageId next_image_id = 1;
  for (const auto& img : dataset.images) next_image_id = std::max(next_image_id, img.image_id + 1);
  const ImageId augmented_id_base = next_image_id;

  const std::size_t n = dataset.samples.size();
  std::vector<Slot> slots(n);
  std::atomic<std::size_t> cursor{0};
  std::atomic<bool> abort{false};
  std::exception_ptr fatal;
  std::mutex fatal_mutex;
  std::vector<StageTimes> times(config.worker_count);

  auto worker = [&](std::size_t worker_index) {
    StageTimes& t = times[worker_index];
    for (std::size_t i = cursor.fetch_add(1); i < n && !abort; i = cursor.fetch_add(1)) {
      const ReferringSample& sample = dataset.samples[i];
      Slot& slot = slots[i];
      Rng rng = derive_sample_rng(config.master_seed, sample.sample_id);
      if (!gate(config.gamma, rng)) continue;
      try {
        AugmentedSample aug = augment_timed(sample, store, config, cache, rng, t);
        const auto w0 = Clock::now();
        const std::string file = augmented_file_name(sample);
        writer.write_file(file, encode_png(aug.image));
        slot.record = augmented_record(aug, augmented_id_base + i, i + 1, file);
        slot.constraint_fallback = aug.plan.constraint_fallback;
        slot.outcome = Outcome::kAugmented;
        t.write += seconds_since(w0);
      } catch (const PoolTooSmall&) {
        slot.outcome = Outcome::kPoolTooSmall;
      } catch (const WriteError&) {
        std::lock_guard lock(fatal_mutex);
        if (!fatal) fatal = std::current_exception();
        abort = true;
      } catch (const std::exception& e) {
        slot.outcome = Outcome::kError;
        slot.error = e.what();
      }
    }
  };

  if (config.worker_count == 1) {
    worker(0);
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(config.worker_count);
    for (std::size_t w = 0; w < config.worker_count; ++w) pool.emplace_back(worker, w);
  }
  if (fatal) {
    writer.mark_partial("aborted after a write failure");
    std::rethrow_exception(fatal);
  }

  RunReport report;
  report.total = n;
  report.config_echo = provenance_snapshot(config);
  report.config_echo["grid"] = to_string(config.compositor.grid);
  report.config_echo["worker_count"] = config.worker_count;

  const auto w0 = Clock::now();
  std::vector<bool> copied(dataset.images.size(), false);
  try {
    for (std::size_t i = 0; i < n; ++i) {
      Slot& slot = slots[i];
      const ReferringSample& sample = dataset.samples[i];
      switch (slot.outcome) {
        case Outcome::kAugmented:
          ++report.augmented;
          if (slot.constraint_fallback) ++report.constraint_fallbacks;
          writer.append(std::move(*slot.record));
          continue;
        case Outcome::kPassThrough: ++report.passed_through; break;
        case Outcome::kPoolTooSmall: ++report.pool_too_small; break;
        case Outcome::kError:
          ++report.errors;
          report.error_ledger.push_back({sample.sample_id, slot.error});
          spdlog::warn("sample {}: {}", sample.sample_id, slot.error);
          break;
      }
      const ImageRecord& image = dataset.image(sample.image_id);
      const std::string file = passthrough_file_name(image);
      const std::size_t image_index = static_cast<std::size_t>(&image - dataset.images.data());
      if (!copied[image_index]) {
        writer.copy_file(file, image.file);
        copied[image_index] = true;
      }
      writer.append(passthrough_record(sample, image, i + 1, file));
    }

    if (options.dump_previews > 0) {
      std::size_t written = 0;
      for (std::size_t i = 0; i < n && written < options.dump_previews; ++i) {
        if (slots[i].outcome != Outcome::kAugmented) continue;
        const ReferringSample& sample = dataset.samples[i];
        Rng rng = derive_sample_rng(config.master_seed, sample.sample_id);
        gate(config.gamma, rng);
        const AugmentedSample aug = augment_sample(sample, store, config, cache, rng);
        writer.write_file("previews/preview_" + std::to_string(sample.sample_id) + ".png",
                          encode_png(render_preview(aug)));
        ++written;
      }
    }
    report.manifest = writer.finish();
  } catch (const WriteError&) {
    writer.mark_partial("aborted after a write failure");
    throw;
  }

  for (const auto& t : times) {
    report.mine_seconds += t.mine;
    report.compose_seconds += t.compose;
    report.write_seconds += t.write;
  }
  report.write_seconds += seconds_since(w0);
  report.wall_seconds = seconds_since(started);

  if (n > 0 && static_cast<double>(report.errors) > options.max_error_rate * static_cast<double>(n)) {
    throw RunFailed(std::to_string(report.errors) + " of " + std::to_string(n) +
                        " samples failed (limit " + std::to_string(options.max_error_rate * 100) + "%)",
                    std::move(report));
  }
  return report;
}

}  // namespace nemo
