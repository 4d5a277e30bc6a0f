#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

#include "nemo/config.hpp"
#include "nemo/dataset.hpp"
#include "nemo/dataset_writer.hpp"
#include "nemo/difficulty.hpp"
#include "nemo/embedding_store.hpp"
#include "nemo/image_cache.hpp"
#include "nemo/negative_miner.hpp"
#include "nemo/pipeline.hpp"

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

void configure_logging() {
  const char* level = std::getenv("NEMO_FORGE_LOG");
  spdlog::set_level(level ? spdlog::level::from_str(level) : spdlog::level::info);
  spdlog::set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
}

void emit_json(const json& j, const fs::path& path) {
  if (path.empty()) {
    std::cout << j.dump(2) << '\n';
    return;
  }
  std::ofstream out(path, std::ios::trunc);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

int cmd_augment(const nemo::CliInvocation& inv) {
  const auto dataset = nemo::load_dataset(inv.dataset);
  const auto store = nemo::load_embeddings(inv.embeddings);
  spdlog::info("loaded {} images, {} samples, {} embedding rows", dataset.images.size(),
               dataset.samples.size(), store.image_count());
  nemo::RunOptions options;
  options.out_dir = inv.out;
  options.dump_previews = inv.dump_previews;
  try {
    const auto report = nemo::run(dataset, store, inv.config, options);
    spdlog::info("augmented {} / {} samples in {:.2f}s", report.augmented, report.total, report.wall_seconds);
    emit_json(report.to_json(), inv.report);
    return 0;
  } catch (const nemo::RunFailed& e) {
    emit_json(e.report().to_json(), inv.report);
    spdlog::error("{}", e.what());
    return 3;
  }
}

int cmd_preview(const nemo::CliInvocation& inv) {
  const auto dataset = nemo::load_dataset(inv.dataset);
  const auto store = nemo::load_embeddings(inv.embeddings);
  nemo::ImageCache cache(dataset);
  nemo::DatasetWriter writer(inv.out);
  std::size_t written = 0;
  for (const auto& sample : dataset.samples) {
    if (written >= inv.dump_previews) break;
    nemo::Rng rng = nemo::derive_sample_rng(inv.config.master_seed, sample.sample_id);
    if (!nemo::gate(inv.config.gamma, rng)) continue;
    try {
      const auto aug = nemo::augment_sample(sample, store, inv.config, cache, rng);
      writer.write_file("previews/preview_" + std::to_string(sample.sample_id) + ".png",
                        nemo::encode_png(nemo::render_preview(aug)));
      ++written;
    } catch (const nemo::PoolTooSmall& e) {
      spdlog::debug("{}", e.what());
    }
  }
  spdlog::info("wrote {} preview(s) to {}", written, (inv.out / "previews").string());
  return 0;
}

int cmd_mine(const nemo::CliInvocation& inv) {
  const auto dataset = nemo::load_dataset(inv.dataset);
  const auto store = nemo::load_embeddings(inv.embeddings);
  std::ofstream file;
  if (!inv.out.empty()) file.open(inv.out, std::ios::trunc);
  std::ostream& out = inv.out.empty() ? std::cout : file;
  std::size_t too_small = 0;
  for (const auto& sample : dataset.samples) {
    json line{{"sample_id", sample.sample_id}, {"image_id", sample.image_id}};
    try {
      const auto pool = nemo::build_pool(store, sample, inv.config.mining);
      line["pool"] = pool.pool;
      line["excluded_upper"] = pool.excluded_upper;
    } catch (const nemo::PoolTooSmall& e) {
      line["pool"] = json::array();
      line["pool_too_small"] = e.survivors();
      ++too_small;
    }
    out << line.dump() << '\n';
  }
  spdlog::info("mined {} pools ({} too small)", dataset.samples.size(), too_small);
  return 0;
}

int cmd_analyze(const nemo::CliInvocation& inv) {
  nemo::LoadOptions load;
  load.require_image_files = false;
  const auto dataset = nemo::load_dataset(inv.dataset, load);
  std::vector<nemo::DetectionRecord> detections;
  if (!inv.detections.empty()) detections = nemo::load_detections(inv.detections);
  nemo::NegativeObjectOptions options;
  options.target_iou_floor = inv.iou_floor;
  const auto profiles = nemo::profile_samples(dataset, detections, options);

  fs::create_directories(inv.out);
  std::ofstream csv(inv.out / "profiles.csv", std::ios::trunc);
  nemo::write_profiles_csv(csv, profiles);
  emit_json(nemo::summarize(dataset, profiles, options), inv.out / "summary.json");
  std::ofstream md(inv.out / "lengths.md", std::ios::trunc);
  md << nemo::length_table_markdown(nemo::bin_by_sentence_length(dataset.samples));
  spdlog::info("profiled {} samples into {}", profiles.size(), inv.out.string());
  return 0;
}

int cmd_validate_embeddings(const nemo::CliInvocation& inv) {
  const auto store = nemo::load_embeddings(inv.embeddings);
  json summary{{"dim", store.dim()}, {"images", store.image_count()}, {"texts", store.text_count()}};
  int code = 0;
  if (!inv.dataset.empty()) {
    nemo::LoadOptions load;
    load.require_image_files = false;
    const auto dataset = nemo::load_dataset(inv.dataset, load);
    const auto coverage = nemo::check_coverage(store, dataset);
    summary["missing_images"] = coverage.missing_images;
    summary["missing_texts"] = coverage.missing_texts;
    if (!coverage.complete()) code = 2;
  }
  std::cout << summary.dump(2) << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();
  std::vector<std::string> args(argv + 1, argv + argc);
  nemo::CliInvocation inv;
  try {
    inv = nemo::parse_args(args);
  } catch (const nemo::HelpRequested& help) {
    std::cout << help.what();
    return 0;
  } catch (const nemo::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n\n" << nemo::help_text();
    return 64;
  }
  if (inv.verbose) std::cerr << nemo::config_to_json(inv.config).dump(2) << '\n';

  try {
    if (inv.subcommand == "augment") return cmd_augment(inv);
    if (inv.subcommand == "mine") return cmd_mine(inv);
    if (inv.subcommand == "analyze") return cmd_analyze(inv);
    if (inv.subcommand == "validate-embeddings") return cmd_validate_embeddings(inv);
    if (inv.subcommand == "preview") return cmd_preview(inv);
  } catch (const nemo::DatasetParseError& e) {
    spdlog::error("{} (byte {})", e.what(), e.byte_offset());
    return 1;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 64;
}
