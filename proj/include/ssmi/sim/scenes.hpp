#pragma once

// Hand-built dense maps and per-cell information surfaces.

#include <cmath>
#include <cstdint>
#include <ostream>
#include <vector>

#include "ssmi/gridmap.hpp"
#include "ssmi/planner.hpp"
#include "ssmi/sim/config.hpp"
#include "ssmi/sim/episode.hpp"
#include "ssmi/trajectory.hpp"

namespace ssmi::sim {

inline LogOddsVector logodds_of(std::vector<double> pmf) {
  return logodds_from_pmf(CategoricalPmf(std::move(pmf)));
}

/// Two identical tiles side by side, each holding one wall: a confidently
/// labelled red wall [0.1, 0.8, 0.1] in the left tile and an ambiguous green
/// wall [0.1, 0.45, 0.45] in the right one. Both walls are 90% occupied, so
/// binary views of the tiles coincide. The rest of the map is known free.
struct TwoWallScene {
  static constexpr std::int32_t kTile = 24;
  static constexpr std::int32_t kHeight = 16;
  static constexpr std::int32_t kNear = 3;  // cells

  GridMap map;
  std::vector<std::size_t> red_wall, green_wall;
  std::vector<std::size_t> near_red, near_green;  // free cells within kNear of a wall

  static TwoWallScene build(double free_logodds = -3.0) {
    const GridFrame frame{{2 * kTile, kHeight, 1}, 1.0, {0.0, 0.0, 0.0}};
    LogOddsVector background(2);
    background.set(1, free_logodds);
    background.set(2, free_logodds);
    TwoWallScene s{GridMap(frame, LogOddsVector(2)), {}, {}, {}, {}};
    for (std::size_t i = 0; i < frame.cell_count(); ++i) s.map.set(i, background);
    const LogOddsVector red = logodds_of({0.1, 0.8, 0.1});
    const LogOddsVector green = logodds_of({0.1, 0.45, 0.45});
    // Wall: 2 x 8 cells in the middle of each tile.
    for (std::int32_t tile = 0; tile < 2; ++tile) {
      for (std::int32_t y = 4; y < 12; ++y) {
        for (std::int32_t x = 11; x < 13; ++x) {
          const std::size_t i = frame.index({tile * kTile + x, y, 0});
          s.map.set(i, tile == 0 ? red : green);
          (tile == 0 ? s.red_wall : s.green_wall).push_back(i);
        }
      }
    }
    for (std::int32_t tile = 0; tile < 2; ++tile) {
      for (std::int32_t y = 4 - kNear; y < 12 + kNear; ++y) {
        for (std::int32_t x = 11 - kNear; x < 13 + kNear; ++x) {
          if (x >= 11 && x < 13 && y >= 4 && y < 12) continue;
          (tile == 0 ? s.near_red : s.near_green).push_back(frame.index({tile * kTile + x, y, 0}));
        }
      }
    }
    return s;
  }
};

struct SurfaceCell {
  std::int32_t x = 0, y = 0;
  std::size_t index = 0;
  double mi = 0.0;
};

/// MI of one fan placed at the centre of every cell in layer `z` whose most
/// likely class is free. `binary` evaluates the occupancy-only collapse.
inline std::vector<SurfaceCell> mi_surface(const GridMap& map, const BeamFan& fan, const SensorParams& params,
                                           OverlapPolicy policy, bool binary, std::int32_t z = 0,
                                           double heading = 0.0) {
  const GridFrame& f = map.frame();
  if (z < 0 || z >= f.dims[2]) throw IndexOutOfRange("surface layer outside map");
  const SensorParams used = binary ? collapse_to_binary(params) : params;
  std::vector<SurfaceCell> out;
  for (std::int32_t y = 0; y < f.dims[1]; ++y) {
    for (std::int32_t x = 0; x < f.dims[0]; ++x) {
      const std::size_t i = f.index({x, y, z});
      if (map.most_likely_class(i) != 0) continue;
      const auto beams = fan.beams(f.center({x, y, z}), heading);
      out.push_back({x, y, i, trajectory_mi(map, beams, used, policy, binary).value});
    }
  }
  return out;
}

inline void write_surface_csv(std::ostream& os, const std::vector<SurfaceCell>& cells, std::uint64_t cfg_hash) {
  os << "# config-hash: " << hex64(cfg_hash) << "\n";
  os << "x,y,mi\n";
  for (const SurfaceCell& c : cells) os << c.x << ',' << c.y << ',' << format_g(c.mi) << "\n";
}

}  // namespace ssmi::sim
