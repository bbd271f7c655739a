#pragma once

// Ground-truth class grids for the exploration simulator.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ssmi/errors.hpp"
#include "ssmi/geometry.hpp"
#include "ssmi/logodds.hpp"
#include "ssmi/sim/rng.hpp"

namespace ssmi::sim {

enum class EnvProfile { Random, Structured };

inline std::string to_string(EnvProfile p) { return p == EnvProfile::Random ? "random" : "structured"; }

inline EnvProfile env_profile_from_string(const std::string& s) {
  if (s == "random") return EnvProfile::Random;
  if (s == "structured") return EnvProfile::Structured;
  throw InvalidArgument("unknown environment profile '" + s + "'");
}

struct EnvSpec {
  EnvProfile profile = EnvProfile::Random;
  std::array<std::int32_t, 3> dims{32, 32, 1};
  double resolution = 0.5;
  std::size_t num_classes = 3;
  double target_occupancy = 0.2;
  std::int32_t min_block = 2;  // cells
  std::int32_t max_block = 4;
};

struct Environment {
  GridFrame frame;
  std::size_t num_classes = 1;
  std::vector<ClassId> truth;  // per cell, 0 = free
  std::vector<std::size_t> spawn_cells;  // the first one is used

  bool is_3d() const { return frame.dims[2] > 1; }
  ClassId at(std::size_t i) const { return truth[i]; }
  ClassId at(const GridKey& k) const { return truth[frame.index(k)]; }
  bool is_free(std::size_t i) const { return truth[i] == 0; }

  double occupancy() const {
    const auto occ = std::count_if(truth.begin(), truth.end(), [](ClassId c) { return c != 0; });
    return static_cast<double>(occ) / static_cast<double>(truth.size());
  }
};

/// Axis-aligned box in cell coordinates, [lo, hi).
struct CellBox {
  GridKey lo, hi;
  ClassId cls = 1;
};

namespace detail {

inline void paint(Environment& env, const CellBox& b) {
  for (std::int32_t z = std::max(b.lo.z, 0); z < std::min(b.hi.z, env.frame.dims[2]); ++z) {
    for (std::int32_t y = std::max(b.lo.y, 0); y < std::min(b.hi.y, env.frame.dims[1]); ++y) {
      for (std::int32_t x = std::max(b.lo.x, 0); x < std::min(b.hi.x, env.frame.dims[0]); ++x) {
        env.truth[env.frame.index({x, y, z})] = b.cls;
      }
    }
  }
}

/// Closes diagonal-only contacts between occupied cells in every horizontal
/// layer: a ray through the shared corner would otherwise pass between two
/// touching obstacles.
inline void close_diagonal_gaps(Environment& env, const std::vector<char>& keep_free) {
  const GridFrame& f = env.frame;
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::int32_t z = 0; z < f.dims[2]; ++z) {
      for (std::int32_t y = 0; y + 1 < f.dims[1]; ++y) {
        for (std::int32_t x = 0; x + 1 < f.dims[0]; ++x) {
          const std::size_t a = f.index({x, y, z}), b = f.index({x + 1, y, z});
          const std::size_t c = f.index({x, y + 1, z}), d = f.index({x + 1, y + 1, z});
          std::size_t fill[2];
          ClassId cls = 0;
          if (!env.is_free(a) && !env.is_free(d) && env.is_free(b) && env.is_free(c)) {
            fill[0] = b;
            fill[1] = c;
            cls = env.at(a);
          } else if (!env.is_free(b) && !env.is_free(c) && env.is_free(a) && env.is_free(d)) {
            fill[0] = a;
            fill[1] = d;
            cls = env.at(b);
          } else {
            continue;
          }
          if (!keep_free[fill[0]]) {
            env.truth[fill[0]] = cls;
          } else if (!keep_free[fill[1]]) {
            env.truth[fill[1]] = cls;
          } else {
            continue;
          }
          changed = true;
        }
      }
    }
  }
}

/// Face-connected free cells reachable from `start`.
inline std::vector<char> flood_free(const Environment& env, std::size_t start) {
  const GridFrame& f = env.frame;
  std::vector<char> seen(env.truth.size(), 0);
  if (!env.is_free(start)) return seen;
  std::vector<std::size_t> stack{start};
  seen[start] = 1;
  while (!stack.empty()) {
    const GridKey k = f.key(stack.back());
    stack.pop_back();
    for (int a = 0; a < 3; ++a) {
      for (int s = -1; s <= 1; s += 2) {
        GridKey n = k;
        n[a] += s;
        if (!f.contains(n)) continue;
        const std::size_t j = f.index(n);
        if (!seen[j] && env.is_free(j)) {
          seen[j] = 1;
          stack.push_back(j);
        }
      }
    }
  }
  return seen;
}

/// Fills free pockets that cannot be reached from the spawn cell.
inline void fill_pockets(Environment& env, std::size_t spawn) {
  const std::vector<char> reach = flood_free(env, spawn);
  const GridFrame& f = env.frame;
  for (std::size_t i = 0; i < env.truth.size(); ++i) {
    if (!env.is_free(i) || reach[i]) continue;
    ClassId cls = 0;
    const GridKey k = f.key(i);
    for (int a = 0; a < 3 && cls == 0; ++a) {
      for (int s = -1; s <= 1 && cls == 0; s += 2) {
        GridKey n = k;
        n[a] += s;
        if (f.contains(n)) cls = env.at(n);
      }
    }
    env.truth[i] = cls == 0 ? ClassId{1} : cls;
  }
}

/// Free cells whose 3x3 neighbourhood in the bottom layer is free too.
inline std::vector<std::size_t> spawn_candidates(const Environment& env) {
  const GridFrame& f = env.frame;
  std::vector<std::size_t> out;
  for (std::int32_t y = 1; y + 1 < f.dims[1]; ++y) {
    for (std::int32_t x = 1; x + 1 < f.dims[0]; ++x) {
      bool ok = true;
      for (std::int32_t dy = -1; dy <= 1 && ok; ++dy) {
        for (std::int32_t dx = -1; dx <= 1 && ok; ++dx) ok = env.is_free(f.index({x + dx, y + dy, 0}));
      }
      if (ok) out.push_back(f.index({x, y, 0}));
    }
  }
  return out;
}

inline ClassId class_for(std::size_t i, std::size_t num_classes) {
  return static_cast<ClassId>(i % num_classes + 1);
}

inline void finish(Environment& env, std::size_t spawn, const std::vector<char>& keep_free) {
  close_diagonal_gaps(env, keep_free);
  fill_pockets(env, spawn);
  std::vector<std::size_t> cands = spawn_candidates(env);
  if (std::find(cands.begin(), cands.end(), spawn) == cands.end()) {
    throw BadDims("generator could not keep a free spawn neighbourhood");
  }
  std::erase(cands, spawn);
  env.spawn_cells.clear();
  env.spawn_cells.push_back(spawn);
  env.spawn_cells.insert(env.spawn_cells.end(), cands.begin(), cands.end());
}

inline std::vector<char> keep_out(const GridFrame& f, std::int32_t sx, std::int32_t sy,
                                  std::int32_t radius) {
  std::vector<char> keep(f.cell_count(), 0);
  for (std::int32_t z = 0; z < f.dims[2]; ++z) {
    for (std::int32_t y = sy - radius; y <= sy + radius; ++y) {
      for (std::int32_t x = sx - radius; x <= sx + radius; ++x) {
        if (f.contains(GridKey{x, y, z})) keep[f.index({x, y, z})] = 1;
      }
    }
  }
  return keep;
}

inline Environment generate_random(std::uint64_t seed, const EnvSpec& spec, Environment env) {
  Rng rng = RngStreams(seed).stream("env");
  const GridFrame& f = env.frame;
  std::uniform_int_distribution<std::int32_t> sx(2, f.dims[0] - 3), sy(2, f.dims[1] - 3);
  const std::int32_t spawn_x = sx(rng), spawn_y = sy(rng);
  const std::vector<char> keep = keep_out(f, spawn_x, spawn_y, 2);

  std::uniform_int_distribution<std::int32_t> bx(0, f.dims[0] - 1), by(0, f.dims[1] - 1);
  std::uniform_int_distribution<std::int32_t> size(spec.min_block, spec.max_block);
  std::uniform_int_distribution<std::int32_t> height(std::max(1, f.dims[2] / 2), f.dims[2]);
  std::uniform_int_distribution<std::size_t> cls(1, spec.num_classes);
  // Dart throwing: block centres keep a minimum spacing.
  const double spacing = spec.max_block + 1.0;
  std::vector<std::array<double, 2>> centres;
  for (int attempt = 0; attempt < 5000 && env.occupancy() < spec.target_occupancy; ++attempt) {
    const std::int32_t w = size(rng), h = size(rng);
    const std::int32_t x0 = bx(rng), y0 = by(rng);
    const std::int32_t hz = f.dims[2] > 1 ? height(rng) : 1;
    const ClassId c = static_cast<ClassId>(cls(rng));
    const std::array<double, 2> centre{x0 + w / 2.0, y0 + h / 2.0};
    const bool crowded = std::any_of(centres.begin(), centres.end(), [&](const auto& o) {
      return std::hypot(o[0] - centre[0], o[1] - centre[1]) < spacing;
    });
    if (crowded) continue;
    bool blocked = false;
    for (std::int32_t y = y0; y < y0 + h && !blocked; ++y) {
      for (std::int32_t x = x0; x < x0 + w && !blocked; ++x) {
        if (f.contains(GridKey{x, y, 0}) && keep[f.index({x, y, 0})]) blocked = true;
      }
    }
    if (blocked) continue;
    centres.push_back(centre);
    paint(env, {{x0, y0, 0}, {x0 + w, y0 + h, hz}, c});
  }
  finish(env, f.index({spawn_x, spawn_y, 0}), keep);
  return env;
}

/// Corridor-and-blocks layout in fractions of the map extent:
/// {x0, y0, x1, y1, class slot}.
inline constexpr std::array<std::array<double, 5>, 12> kStructuredLayout{{
    {0.00, 0.44, 0.38, 0.50, 0},  // corridor wall, west part
    {0.50, 0.44, 1.00, 0.50, 0},  // corridor wall, east part
    {0.00, 0.62, 0.62, 0.68, 1},  // second corridor wall
    {0.75, 0.62, 1.00, 0.68, 1},
    {0.62, 0.68, 0.68, 0.88, 2},  // room divider
    {0.12, 0.10, 0.22, 0.22, 2},  // blocks in the south hall
    {0.34, 0.06, 0.44, 0.16, 0},
    {0.58, 0.18, 0.70, 0.28, 1},
    {0.80, 0.08, 0.90, 0.30, 2},
    {0.12, 0.78, 0.26, 0.88, 0},  // blocks in the north rooms
    {0.38, 0.80, 0.48, 0.94, 1},
    {0.80, 0.78, 0.92, 0.90, 0},
}};

inline Environment generate_structured(const EnvSpec& spec, Environment env) {
  const GridFrame& f = env.frame;
  for (const auto& r : kStructuredLayout) {
    const auto cx = [&](double v) { return static_cast<std::int32_t>(std::lround(v * f.dims[0])); };
    const auto cy = [&](double v) { return static_cast<std::int32_t>(std::lround(v * f.dims[1])); };
    paint(env, {{cx(r[0]), cy(r[1]), 0},
                {std::max(cx(r[2]), cx(r[0]) + 1), std::max(cy(r[3]), cy(r[1]) + 1), f.dims[2]},
                class_for(static_cast<std::size_t>(r[4]), spec.num_classes)});
  }
  const std::int32_t spawn_x = static_cast<std::int32_t>(0.08 * f.dims[0]) + 1;
  const std::int32_t spawn_y = static_cast<std::int32_t>(0.33 * f.dims[1]);
  const std::vector<char> keep = keep_out(f, spawn_x, spawn_y, 1);
  for (std::size_t i = 0; i < keep.size(); ++i) {
    if (keep[i]) env.truth[i] = 0;
  }
  finish(env, f.index({spawn_x, spawn_y, 0}), keep);
  return env;
}

}  // namespace detail

/// Deterministic ground truth for (seed, spec). Horizontal extents must be at
/// least 16 cells; the vertical extent is 1 (planar) or at least 4.
inline Environment generate_env(std::uint64_t seed, const EnvSpec& spec) {
  if (spec.dims[0] < 16 || spec.dims[1] < 16 || spec.dims[2] < 1 ||
      (spec.dims[2] > 1 && spec.dims[2] < 4)) {
    throw BadDims("environment extents must be >= 16 horizontally and 1 or >= 4 vertically");
  }
  if (!(spec.resolution > 0.0)) throw BadDims("resolution must be positive");
  if (spec.num_classes < 1) throw InvalidArgument("need at least one occupied class");
  if (spec.min_block < 1 || spec.max_block < spec.min_block) throw InvalidArgument("bad block sizes");
  if (!(spec.target_occupancy >= 0.0 && spec.target_occupancy < 0.6)) {
    throw InvalidArgument("target occupancy must lie in [0, 0.6)");
  }
  Environment env;
  env.frame = GridFrame{spec.dims, spec.resolution, {0.0, 0.0, 0.0}};
  env.num_classes = spec.num_classes;
  env.truth.assign(env.frame.cell_count(), 0);
  return spec.profile == EnvProfile::Random ? detail::generate_random(seed, spec, std::move(env))
                                            : detail::generate_structured(spec, std::move(env));
}

/// Cells a perfect sensor could ever report: free cells face-connected to the
/// spawn cell plus the occupied cells touching them.
inline std::vector<char> observable_cells(const Environment& env) {
  std::vector<char> obs = detail::flood_free(env, env.spawn_cells.at(0));
  const GridFrame& f = env.frame;
  std::vector<char> out = obs;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    if (!obs[i]) continue;
    const GridKey k = f.key(i);
    for (int a = 0; a < 3; ++a) {
      for (int s = -1; s <= 1; s += 2) {
        GridKey n = k;
        n[a] += s;
        if (f.contains(n) && !env.is_free(f.index(n))) out[f.index(n)] = 1;
      }
    }
  }
  return out;
}

inline std::uint64_t env_hash(const Environment& env) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  auto mix = [&](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xFF;
      h *= 0x100000001B3ull;
    }
  };
  for (int a = 0; a < 3; ++a) mix(static_cast<std::uint64_t>(env.frame.dims[a]));
  mix(env.num_classes);
  for (ClassId c : env.truth) mix(c);
  mix(env.spawn_cells.at(0));
  return h;
}

}  // namespace ssmi::sim
