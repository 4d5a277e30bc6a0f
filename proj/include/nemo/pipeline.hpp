#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "nemo/dataset.hpp"
#include "nemo/embedding_store.hpp"
#include "nemo/image_cache.hpp"
#include "nemo/mosaic.hpp"
#include "nemo/negative_miner.hpp"

namespace nemo {

struct PipelineConfig {
  double gamma = 0.6;
  MiningConfig mining;
  CompositorOptions compositor;
  std::uint64_t master_seed = 0;
  std::size_t worker_count = 1;

  void validate() const;
  friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;
};

// Settings that influence output bytes; worker_count is deliberately absent.
nlohmann::json provenance_snapshot(const PipelineConfig& config);

struct SampleError {
  SampleId sample_id = 0;
  std::string message;
};

struct RunReport {
  std::size_t total = 0;
  std::size_t augmented = 0;
  std::size_t passed_through = 0;
  std::size_t pool_too_small = 0;
  std::size_t errors = 0;
  std::size_t constraint_fallbacks = 0;  // subset of augmented
  double wall_seconds = 0.0;
  double mine_seconds = 0.0;     // summed over workers
  double compose_seconds = 0.0;  // summed over workers
  double write_seconds = 0.0;    // summed over workers
  std::vector<SampleError> error_ledger;
  std::filesystem::path manifest;
  nlohmann::json config_echo;

  nlohmann::json to_json() const;
};

class RunFailed : public std::runtime_error {
 public:
  RunFailed(const std::string& what, RunReport report)
      : std::runtime_error(what), report_(std::move(report)) {}
  const RunReport& report() const { return report_; }

 private:
  RunReport report_;
};

struct RunOptions {
  std::filesystem::path out_dir;
  // Composed previews with mask overlay, written under out_dir/previews.
  std::size_t dump_previews = 0;
  // Fraction of sample-level errors above which the run fails.
  double max_error_rate = 0.01;
};

// Bernoulli(gamma) gate using the sample's derived generator. Draws exactly
// one value from `rng`.
bool gate(double gamma, Rng& rng);

// Mine -> plan -> compose for one sample; the generator must be the sample's
// derived generator after the gate draw.
AugmentedSample augment_sample(const ReferringSample& sample, const EmbeddingStore& store,
                               const PipelineConfig& config, ImageCache& cache, Rng& rng);

// Runs the whole dataset, writes outputs, returns the report. Throws
// RunFailed (after writing) when the error rate exceeds the limit.
RunReport run(const Dataset& dataset, const EmbeddingStore& store, const PipelineConfig& config,
              const RunOptions& options);

}  // namespace nemo
