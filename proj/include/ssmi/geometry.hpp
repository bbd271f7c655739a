#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "ssmi/errors.hpp"

namespace ssmi {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  double operator[](int a) const { return a == 0 ? x : (a == 1 ? y : z); }
  double& operator[](int a) { return a == 0 ? x : (a == 1 ? y : z); }

  friend Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
  friend bool operator==(const Vec3&, const Vec3&) = default;

  double norm() const { return std::sqrt(x * x + y * y + z * z); }
  Vec3 normalized() const {
    const double n = norm();
    return {x / n, y / n, z / n};
  }
};

struct GridKey {
  std::int32_t x = 0, y = 0, z = 0;

  std::int32_t operator[](int a) const { return a == 0 ? x : (a == 1 ? y : z); }
  std::int32_t& operator[](int a) { return a == 0 ? x : (a == 1 ? y : z); }
  friend bool operator==(const GridKey&, const GridKey&) = default;
};

/// Axis-aligned block of cubic cells anchored at `origin` (world position of
/// the minimum corner of cell (0,0,0)).
struct GridFrame {
  std::array<std::int32_t, 3> dims{1, 1, 1};
  double resolution = 1.0;  // meters per cell
  Vec3 origin{};

  std::size_t cell_count() const {
    return static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]) *
           static_cast<std::size_t>(dims[2]);
  }

  bool contains(const GridKey& k) const {
    return k.x >= 0 && k.y >= 0 && k.z >= 0 && k.x < dims[0] && k.y < dims[1] && k.z < dims[2];
  }

  std::size_t index(const GridKey& k) const {
    return static_cast<std::size_t>(k.x) +
           static_cast<std::size_t>(dims[0]) *
               (static_cast<std::size_t>(k.y) + static_cast<std::size_t>(dims[1]) *
                                                    static_cast<std::size_t>(k.z));
  }

  GridKey key(std::size_t index) const {
    const auto nx = static_cast<std::size_t>(dims[0]);
    const auto ny = static_cast<std::size_t>(dims[1]);
    return {static_cast<std::int32_t>(index % nx), static_cast<std::int32_t>((index / nx) % ny),
            static_cast<std::int32_t>(index / (nx * ny))};
  }

  /// Key of the cell containing `p`; may lie outside the frame.
  GridKey key_of(const Vec3& p) const {
    return {static_cast<std::int32_t>(std::floor((p.x - origin.x) / resolution)),
            static_cast<std::int32_t>(std::floor((p.y - origin.y) / resolution)),
            static_cast<std::int32_t>(std::floor((p.z - origin.z) / resolution))};
  }

  Vec3 center(const GridKey& k) const {
    return {origin.x + (k.x + 0.5) * resolution, origin.y + (k.y + 0.5) * resolution,
            origin.z + (k.z + 0.5) * resolution};
  }

  bool contains(const Vec3& p) const {
    for (int a = 0; a < 3; ++a) {
      const double lo = origin[a];
      const double hi = origin[a] + dims[a] * resolution;
      if (!(p[a] >= lo && p[a] < hi)) return false;
    }
    return true;
  }

  friend bool operator==(const GridFrame&, const GridFrame&) = default;
};

struct TraversedCell {
  GridKey key;
  double t_entry = 0.0;  // meters from the ray origin
  double t_exit = 0.0;
};

struct Traversal {
  std::vector<TraversedCell> cells;
  bool left_frame = false;  // stopped at the frame boundary before max_range
};

/// Voxel walk of the segment [origin, origin + max_range * dir] through the
/// frame. Every cell whose interior the segment passes through is visited in
/// order; when the segment crosses an edge or corner exactly, all axes at that
/// crossing advance in a single step. Boundary crossing times are evaluated
/// in closed form from the step count, so the walk is reproducible bit for
/// bit from (origin, dir, frame).
inline Traversal traverse(const GridFrame& frame, const Vec3& origin, const Vec3& dir,
                          double max_range) {
  if (!frame.contains(origin)) {
    throw OriginOutOfBounds("ray origin (" + std::to_string(origin.x) + ", " +
                            std::to_string(origin.y) + ", " + std::to_string(origin.z) +
                            ") outside map");
  }
  Traversal out;
  GridKey key = frame.key_of(origin);
  // Guard against rounding at the upper boundary.
  for (int a = 0; a < 3; ++a) key[a] = std::min(key[a], frame.dims[a] - 1);
  const GridKey start = key;
  constexpr double kInf = std::numeric_limits<double>::infinity();

  std::array<int, 3> step{};
  std::array<std::int64_t, 3> count{0, 0, 0};
  for (int a = 0; a < 3; ++a) step[a] = dir[a] > 0.0 ? 1 : (dir[a] < 0.0 ? -1 : 0);

  auto crossing = [&](int a) -> double {
    if (step[a] == 0) return kInf;
    const std::int64_t boundary = step[a] > 0 ? start[a] + 1 + count[a] : start[a] - count[a];
    return (frame.origin[a] + static_cast<double>(boundary) * frame.resolution - origin[a]) /
           dir[a];
  };

  double t = 0.0;
  while (true) {
    std::array<double, 3> next{crossing(0), crossing(1), crossing(2)};
    const double t_next = std::min({next[0], next[1], next[2]});
    if (t_next >= max_range) {
      out.cells.push_back({key, t, max_range});
      break;
    }
    out.cells.push_back({key, t, t_next});
    bool inside = true;
    for (int a = 0; a < 3; ++a) {
      if (next[a] == t_next) {
        key[a] += step[a];
        ++count[a];
        if (key[a] < 0 || key[a] >= frame.dims[a]) inside = false;
      }
    }
    if (!inside) {
      out.left_frame = true;
      break;
    }
    t = t_next;
  }
  return out;
}

}  // namespace ssmi
