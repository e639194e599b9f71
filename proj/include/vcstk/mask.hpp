#pragma once

#include <span>

#include "vcstk/rng.hpp"
#include "vcstk/volume.hpp"

namespace vcstk {

// Half-open voxel ranges of one axis-aligned block.
struct Block {
  std::size_t x0, x1, y0, y1, z0, z1;
  std::size_t volume() const { return (x1 - x0) * (y1 - y0) * (z1 - z0); }
};

// Non-overlapping blocks of edge `block_edge` covering the volume; remainder
// blocks at the high edges are truncated. Lexicographic (z, y, x) order.
std::vector<Block> partition_blocks(Dims dims, std::size_t block_edge);

struct MaskSpec {
  std::size_t block_edge = 6;
  double p_min = 10.0;  // percent of blocks masked, lower bound
  double p_max = 40.0;
  double tau = 0.5;  // probability of the random branch (vs gradient greedy)
  double activation_epoch_fraction = 0.5;
  double fill_value = 0.0;

  void validate() const;
};

struct MaskSelection {
  std::vector<std::size_t> block_ids;  // ascending
  double sampled_p = 0.0;
  bool greedy = false;
};

// p ~ U[p_min, p_max]; k = max(1, round(p/100 * num_blocks)). One
// Bernoulli(tau) draw picks the branch for the whole image: random = k
// distinct blocks uniform without replacement, greedy = the k blocks with the
// largest sum|grad|, ties to the lower block id. `grad` may be empty only
// when tau == 1 (the greedy branch can never be taken).
MaskSelection select_mask(Dims dims, std::span<const double> grad,
                          const MaskSpec& spec, Rng& rng);

template <typename T>
void apply_mask(std::vector<T>& data, Dims dims,
                const std::vector<Block>& blocks,
                const std::vector<std::size_t>& block_ids, T fill_value) {
  if (data.size() != dims.count())
    throw SizeMismatch("apply_mask: data length != dims");
  for (std::size_t id : block_ids) {
    if (id >= blocks.size())
      throw BlockOutOfRange("block id " + std::to_string(id) + " of " +
                            std::to_string(blocks.size()));
    const Block& b = blocks[id];
    for (std::size_t z = b.z0; z < b.z1; ++z)
      for (std::size_t y = b.y0; y < b.y1; ++y)
        for (std::size_t x = b.x0; x < b.x1; ++x)
          data[dims.index(x, y, z)] = fill_value;
  }
}

}  // namespace vcstk
