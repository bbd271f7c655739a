#pragma once

// Resampling between dense grids and octrees. Each target cell takes the
// value found at its centre in the source; centres outside the source keep
// the prior.

#include <algorithm>
#include <cmath>
#include <optional>

#include "ssmi/gridmap.hpp"
#include "ssmi/octree.hpp"

namespace ssmi {

inline GridMap octree_to_grid(const SemanticOctree& tree, std::optional<double> resolution = std::nullopt) {
  const GridFrame& src = tree.frame();
  const double r = resolution.value_or(src.resolution);
  if (!(r > 0.0)) throw BadDims("resolution must be positive");
  const double extent = src.resolution * src.dims[0];
  const auto n = static_cast<std::int32_t>(std::ceil(extent / r - 1e-9));
  GridMap out(GridFrame{{n, n, n}, r, src.origin}, tree.prior());
  for (std::size_t i = 0; i < out.cell_count(); ++i) {
    const Vec3 c = out.frame().center(out.frame().key(i));
    if (!src.contains(c)) continue;
    const TruncatedSemantics& s = tree.query(c);
    if (!(s == tree.prior_semantics())) out.set(i, s.to_full());
  }
  return out;
}

inline SemanticOctree grid_to_octree(const GridMap& grid, const SensorParams& params,
                                     std::optional<double> resolution = std::nullopt,
                                     FusionMode mode = FusionMode::MortonFold) {
  const GridFrame& src = grid.frame();
  const double r = resolution.value_or(src.resolution);
  if (!(r > 0.0)) throw BadDims("resolution must be positive");
  const double extent = src.resolution * std::max({src.dims[0], src.dims[1], src.dims[2]});
  int depth = 1;
  while (r * static_cast<double>(std::int64_t{1} << depth) < extent - 1e-9) ++depth;
  SemanticOctree tree(depth, r, src.origin, grid.prior(), params, mode);
  const std::int32_t side = tree.side();
  for (std::int32_t z = 0; z < side; ++z) {
    for (std::int32_t y = 0; y < side; ++y) {
      for (std::int32_t x = 0; x < side; ++x) {
        const Vec3 c = tree.frame().center({x, y, z});
        if (!src.contains(c)) continue;
        const std::size_t i = src.index(src.key_of(c));
        if (!grid.is_observed(i)) continue;
        tree.set_element({x, y, z}, TruncatedSemantics::from_full(grid.value(i)));
      }
    }
  }
  tree.prune();
  return tree;
}

}  // namespace ssmi
