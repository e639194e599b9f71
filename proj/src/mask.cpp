#include "vcstk/mask.hpp"

#include <algorithm>
#include <cmath>

namespace vcstk {

std::vector<Block> partition_blocks(Dims dims, std::size_t block_edge) {
  if (block_edge < 1) throw ConfigError("block_edge must be >= 1");
  if (dims.count() == 0) throw NonPositiveDim("partition_blocks: empty dims");
  std::vector<Block> blocks;
  for (std::size_t z0 = 0; z0 < dims.nz; z0 += block_edge)
    for (std::size_t y0 = 0; y0 < dims.ny; y0 += block_edge)
      for (std::size_t x0 = 0; x0 < dims.nx; x0 += block_edge)
        blocks.push_back({x0, std::min(x0 + block_edge, dims.nx),
                          y0, std::min(y0 + block_edge, dims.ny),
                          z0, std::min(z0 + block_edge, dims.nz)});
  return blocks;
}

void MaskSpec::validate() const {
  if (!(p_min > 0.0) || !(p_min <= p_max) || !(p_max <= 100.0))
    throw ConfigError("mask p_range requires 0 < p_min <= p_max <= 100");
  if (!(tau >= 0.0) || !(tau <= 1.0))
    throw ConfigError("mask tau must be in [0, 1]");
  if (block_edge < 1) throw ConfigError("mask block_edge must be >= 1");
  if (!(activation_epoch_fraction >= 0.0) ||
      !(activation_epoch_fraction <= 1.0))
    throw ConfigError("mask activation_epoch_fraction must be in [0, 1]");
  if (!std::isfinite(fill_value))
    throw ConfigError("mask fill_value must be finite");
}

MaskSelection select_mask(Dims dims, std::span<const double> grad,
                          const MaskSpec& spec, Rng& rng) {
  spec.validate();
  const auto blocks = partition_blocks(dims, spec.block_edge);
  if (!grad.empty() && grad.size() != dims.count())
    throw SizeMismatch("select_mask: grad length != dims");
  if (grad.empty() && spec.tau < 1.0)
    throw MissingGradient("greedy branch reachable (tau < 1) but no gradient");

  MaskSelection sel;
  sel.sampled_p = rng.uniform(spec.p_min, spec.p_max);
  const std::size_t k = std::max<std::size_t>(
      1, std::size_t(std::llround(sel.sampled_p / 100.0 *
                                  double(blocks.size()))));
  sel.greedy = !rng.bernoulli(spec.tau);

  if (!sel.greedy) {
    sel.block_ids = rng.sample_without_replacement(blocks.size(), k);
    return sel;
  }
  std::vector<std::pair<double, std::size_t>> scored(blocks.size());
  for (std::size_t id = 0; id < blocks.size(); ++id) {
    const Block& b = blocks[id];
    double s = 0.0;
    for (std::size_t z = b.z0; z < b.z1; ++z)
      for (std::size_t y = b.y0; y < b.y1; ++y)
        for (std::size_t x = b.x0; x < b.x1; ++x)
          s += std::abs(grad[dims.index(x, y, z)]);
    scored[id] = {s, id};
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  for (std::size_t i = 0; i < k && i < scored.size(); ++i)
    sel.block_ids.push_back(scored[i].second);
  std::sort(sel.block_ids.begin(), sel.block_ids.end());
  return sel;
}

}  // namespace vcstk
