#pragma once

// Reference implementations used only by tests. Each is written from the
// definition, independently of the library code path it checks.

#include <set>
#include <string>
#include <vector>

#include "nemo/dataset.hpp"
#include "nemo/embedding_store.hpp"
#include "nemo/mask.hpp"
#include "nemo/negative_miner.hpp"

namespace nemo::oracle {

// Expands runs into a flat column-major buffer, then transposes.
std::vector<std::vector<int>> decode_rle(int height, int width, const std::vector<std::uint32_t>& counts);
std::size_t count_foreground(const std::vector<std::vector<int>>& grid);

double naive_dot(std::span<const float> a, std::span<const float> b);

// Filter every candidate, sort all survivors, cut at K.
std::vector<ImageId> brute_force_pool(const EmbeddingStore& store, const ReferringSample& sample,
                                      const MiningConfig& config);
std::set<ImageId> brute_force_survivors(const EmbeddingStore& store, const ReferringSample& sample,
                                        const MiningConfig& config);

// For each source pixel, paints the destination pixels whose centres fall
// inside that source pixel's footprint.
Bitmap nearest_resize(const Bitmap& src, int dst_h, int dst_w);

// IoU of integer boxes by counting covered pixels.
double pixel_iou(int ax, int ay, int aw, int ah, int bx, int by, int bw, int bh);

// Matches the positional vocabulary with std::regex.
std::set<std::string> regex_keywords(const std::string& expression);

}  // namespace nemo::oracle
