#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "nemo/dataset.hpp"
#include "nemo/embedding_store.hpp"
#include "nemo/rng.hpp"

namespace nemo {

enum class MiningMode {
  kT2IOnly,          // upper bound and ranking both text-to-image
  kI2IUpperT2ILower, // upper bound image-to-image vs the positive, ranking text-to-image
  kDual,             // drop if either t2i >= tau_t2i or i2i >= tau_i2i
  kUniform,          // baseline: every other image
};

std::string_view to_string(MiningMode mode);
MiningMode parse_mining_mode(std::string_view text);

struct MiningConfig {
  // Upper bound; nullopt means no upper bound. Ignored by kDual and kUniform.
  std::optional<double> tau = 0.75;
  std::size_t k = 200;
  MiningMode mode = MiningMode::kI2IUpperT2ILower;
  std::optional<double> tau_t2i;
  std::optional<double> tau_i2i;

  // Throws std::invalid_argument when k < 3, a threshold is outside [-1, 1],
  // or kDual is missing a threshold.
  void validate() const;
  friend bool operator==(const MiningConfig&, const MiningConfig&) = default;
};

class PoolTooSmall : public std::runtime_error {
 public:
  PoolTooSmall(SampleId sample, std::size_t survivors)
      : std::runtime_error("sample " + std::to_string(sample) + ": only " +
                           std::to_string(survivors) + " negative candidate(s) survive the upper bound"),
        survivors_(survivors) {}
  std::size_t survivors() const { return survivors_; }

 private:
  std::size_t survivors_;
};

struct NegativePool {
  SampleId sample_id = 0;
  std::vector<ImageId> pool;  // best first
  std::size_t excluded_upper = 0;
};

struct NegativeSelection {
  SampleId sample_id = 0;
  std::array<ImageId, 3> negatives{};
  std::uint64_t rng_seed_used = 0;
};

// Candidates left after removing the positive image and applying the upper
// bound, unranked, in store row order.
std::vector<ImageId> upper_bound_survivors(const EmbeddingStore& store, const ReferringSample& sample,
                                           const MiningConfig& config);

// Throws PoolTooSmall when fewer than 3 candidates survive. Any K >= 1 is
// accepted here; the K >= 3 floor is a run-level check (validate()).
NegativePool build_pool(const EmbeddingStore& store, const ReferringSample& sample,
                        const MiningConfig& config);

// Partial Fisher-Yates over the first three slots.
NegativeSelection select_negatives(const NegativePool& pool, Rng& rng);

// Draws `count` distinct pool entries; used by larger grids.
std::vector<ImageId> select_distinct(const NegativePool& pool, std::size_t count, Rng& rng);

}  // namespace nemo
