#include "nemo/negative_miner.hpp"

#include <algorithm>
#include <numeric>

namespace nemo {

std::string_view to_string(MiningMode mode) {
  switch (mode) {
    case MiningMode::kT2IOnly: return "t2i";
    case MiningMode::kI2IUpperT2ILower: return "i2i-upper";
    case MiningMode::kDual: return "dual";
    case MiningMode::kUniform: return "uniform";
  }
  return "?";
}

MiningMode parse_mining_mode(std::string_view text) {
  if (text == "t2i") return MiningMode::kT2IOnly;
  if (text == "i2i-upper") return MiningMode::kI2IUpperT2ILower;
  if (text == "dual") return MiningMode::kDual;
  if (text == "uniform") return MiningMode::kUniform;
  throw std::invalid_argument("unknown mining mode '" + std::string(text) + "'");
}

namespace {

void check_thresholds(const MiningConfig& c) {
  auto check = [](const std::optional<double>& t, const char* name) {
    if (t && !(*t >= -1.0 && *t <= 1.0)) {
      throw std::invalid_argument(std::string(name) + " must lie in [-1, 1]");
    }
  };
  check(c.tau, "tau");
  check(c.tau_t2i, "tau_t2i");
  check(c.tau_i2i, "tau_i2i");
  if (c.mode == MiningMode::kDual && (!c.tau_t2i || !c.tau_i2i)) {
    throw std::invalid_argument("dual mode needs both tau_t2i and tau_i2i");
  }
}

}  // namespace

void MiningConfig::validate() const {
  if (k < 3) throw std::invalid_argument("K must be at least 3");
  check_thresholds(*this);
}

namespace {

struct Scored {
  ImageId id;
  double score;
};

// Rank: score descending, then image id ascending.
bool ranks_before(const Scored& a, const Scored& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.id < b.id;
}

struct Candidates {
  std::vector<Scored> survivors;  // carry the ranking score (t2i)
  std::size_t excluded_upper = 0;
};

Candidates filter(const EmbeddingStore& store, const ReferringSample& sample, const MiningConfig& config) {
  const auto& ids = store.image_ids();
  Candidates out;
  out.survivors.reserve(ids.size());

  if (config.mode == MiningMode::kUniform) {
    for (ImageId id : ids)
      if (id != sample.image_id) out.survivors.push_back({id, 0.0});
    return out;
  }

  const auto t2i = store.scores_against(store.text_vector(store.text_row(sample.sample_id)));
  std::vector<double> i2i;
  if (config.mode == MiningMode::kI2IUpperT2ILower || config.mode == MiningMode::kDual) {
    i2i = store.scores_against(store.image_vector(store.image_row(sample.image_id)));
  }

  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] == sample.image_id) continue;
    bool excluded = false;
    switch (config.mode) {
      case MiningMode::kT2IOnly:
        excluded = config.tau && t2i[r] >= *config.tau;
        break;
      case MiningMode::kI2IUpperT2ILower:
        excluded = config.tau && i2i[r] >= *config.tau;
        break;
      case MiningMode::kDual:
        excluded = t2i[r] >= *config.tau_t2i || i2i[r] >= *config.tau_i2i;
        break;
      case MiningMode::kUniform:
        break;
    }
    if (excluded) {
      ++out.excluded_upper;
    } else {
      out.survivors.push_back({ids[r], t2i[r]});
    }
  }
  return out;
}

}  // namespace

std::vector<ImageId> upper_bound_survivors(const EmbeddingStore& store, const ReferringSample& sample,
                                           const MiningConfig& config) {
  check_thresholds(config);
  auto c = filter(store, sample, config);
  std::vector<ImageId> out(c.survivors.size());
  std::transform(c.survivors.begin(), c.survivors.end(), out.begin(), [](const Scored& s) { return s.id; });
  return out;
}

NegativePool build_pool(const EmbeddingStore& store, const ReferringSample& sample, const MiningConfig& config) {
  check_thresholds(config);
  if (config.k == 0) throw std::invalid_argument("K must be positive");
  auto c = filter(store, sample, config);
  if (c.survivors.size() < 3) throw PoolTooSmall(sample.sample_id, c.survivors.size());

  NegativePool pool;
  pool.sample_id = sample.sample_id;
  pool.excluded_upper = c.excluded_upper;
  if (config.mode == MiningMode::kUniform) {
    pool.pool.reserve(c.survivors.size());
    for (const auto& s : c.survivors) pool.pool.push_back(s.id);
    return pool;
  }

  const std::size_t keep = std::min(config.k, c.survivors.size());
  std::partial_sort(c.survivors.begin(), c.survivors.begin() + static_cast<std::ptrdiff_t>(keep),
                    c.survivors.end(), ranks_before);
  pool.pool.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) pool.pool.push_back(c.survivors[i].id);
  return pool;
}

std::vector<ImageId> select_distinct(const NegativePool& pool, std::size_t count, Rng& rng) {
  if (pool.pool.size() < count) {
    throw std::invalid_argument("pool of " + std::to_string(pool.pool.size()) + " cannot supply " +
                                std::to_string(count) + " distinct negatives");
  }
  std::vector<ImageId> work = pool.pool;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(work.size() - i));
    std::swap(work[i], work[j]);
  }
  work.resize(count);
  return work;
}

NegativeSelection select_negatives(const NegativePool& pool, Rng& rng) {
  NegativeSelection sel;
  sel.sample_id = pool.sample_id;
  sel.rng_seed_used = rng.seed();
  const auto picked = select_distinct(pool, 3, rng);
  std::copy(picked.begin(), picked.end(), sel.negatives.begin());
  return sel;
}

}  // namespace nemo
