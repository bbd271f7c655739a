#pragma once

// Frontier exploration planner: a 2-D free/occupied/unknown grid projected
// from the most likely map, frontier clustering, A* paths, and selection of
// the path with the best information per metre.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <queue>
#include <string>
#include <thread>
#include <vector>

#include "ssmi/errors.hpp"
#include "ssmi/geometry.hpp"
#include "ssmi/gridmap.hpp"
#include "ssmi/octree.hpp"
#include "ssmi/trajectory.hpp"

namespace ssmi {

enum class CellLabel : std::uint8_t { Free, Occupied, Unknown };

/// Planar traversability grid. Cell (x, y) has index x + nx * y.
struct PlanningGrid {
  std::int32_t nx = 0, ny = 0;
  double resolution = 1.0;
  Vec3 origin{};
  double sensor_z = 0.0;  // world height of sensing poses
  std::vector<CellLabel> labels;

  std::size_t size() const { return labels.size(); }
  std::size_t index(std::int32_t x, std::int32_t y) const {
    return static_cast<std::size_t>(x) + static_cast<std::size_t>(nx) * static_cast<std::size_t>(y);
  }
  std::int32_t x_of(std::size_t i) const { return static_cast<std::int32_t>(i % static_cast<std::size_t>(nx)); }
  std::int32_t y_of(std::size_t i) const { return static_cast<std::int32_t>(i / static_cast<std::size_t>(nx)); }
  bool contains(std::int32_t x, std::int32_t y) const { return x >= 0 && y >= 0 && x < nx && y < ny; }
  CellLabel at(std::size_t i) const { return labels[i]; }
  bool is_free(std::size_t i) const { return labels[i] == CellLabel::Free; }

  Vec3 center(std::size_t i) const {
    return {origin.x + (x_of(i) + 0.5) * resolution, origin.y + (y_of(i) + 0.5) * resolution,
            sensor_z};
  }

  std::size_t cell_of(const Vec3& p) const {
    const auto x = static_cast<std::int32_t>(std::floor((p.x - origin.x) / resolution));
    const auto y = static_cast<std::int32_t>(std::floor((p.y - origin.y) / resolution));
    if (!contains(x, y)) throw IndexOutOfRange("point outside planning grid");
    return index(x, y);
  }
};

/// Vertical band of cell layers [z_lo, z_hi) that must be free for a column
/// to be traversable.
struct HeightBand {
  std::int32_t z_lo = 0;
  std::int32_t z_hi = 1;
};

namespace detail {

inline CellLabel fold_column(bool any_occupied, bool any_unknown) {
  if (any_occupied) return CellLabel::Occupied;
  if (any_unknown) return CellLabel::Unknown;
  return CellLabel::Free;
}

}  // namespace detail

/// Column labels of a dense map: occupied if any band cell's most likely
/// class is occupied, else unknown if any band cell still holds the prior.
inline PlanningGrid project(const GridMap& map, HeightBand band = {}) {
  const GridFrame& f = map.frame();
  band.z_lo = std::max(band.z_lo, 0);
  band.z_hi = std::min(band.z_hi, f.dims[2]);
  if (band.z_lo >= band.z_hi) throw InvalidArgument("empty height band");
  PlanningGrid g{f.dims[0], f.dims[1], f.resolution, f.origin,
                 f.origin.z + (band.z_lo + 0.5) * f.resolution, {}};
  g.labels.resize(static_cast<std::size_t>(g.nx) * static_cast<std::size_t>(g.ny));
  for (std::int32_t y = 0; y < g.ny; ++y) {
    for (std::int32_t x = 0; x < g.nx; ++x) {
      bool occ = false, unknown = false;
      for (std::int32_t z = band.z_lo; z < band.z_hi; ++z) {
        const std::size_t i = f.index({x, y, z});
        if (!map.is_observed(i)) {
          unknown = true;
        } else if (map.most_likely_class(i) != 0) {
          occ = true;
        }
      }
      g.labels[g.index(x, y)] = detail::fold_column(occ, unknown);
    }
  }
  return g;
}

/// Same projection over octree elements, cropped to `nx` by `ny` columns.
inline PlanningGrid project(const SemanticOctree& tree, std::int32_t nx, std::int32_t ny,
                            HeightBand band = {}) {
  const GridFrame& f = tree.frame();
  nx = std::min(nx, f.dims[0]);
  ny = std::min(ny, f.dims[1]);
  band.z_lo = std::max(band.z_lo, 0);
  band.z_hi = std::min(band.z_hi, f.dims[2]);
  if (band.z_lo >= band.z_hi) throw InvalidArgument("empty height band");
  PlanningGrid g{nx, ny, f.resolution, f.origin, f.origin.z + (band.z_lo + 0.5) * f.resolution,
                 {}};
  g.labels.resize(static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny));
  const TruncatedSemantics& prior = tree.prior_semantics();
  for (std::int32_t y = 0; y < ny; ++y) {
    for (std::int32_t x = 0; x < nx; ++x) {
      bool occ = false, unknown = false;
      for (std::int32_t z = band.z_lo; z < band.z_hi; ++z) {
        const TruncatedSemantics& s = tree.query(GridKey{x, y, z});
        if (s == prior) {
          unknown = true;
        } else if (most_likely_class(s.to_full()) != 0) {
          occ = true;
        }
      }
      g.labels[g.index(x, y)] = detail::fold_column(occ, unknown);
    }
  }
  return g;
}

struct Frontier {
  std::vector<std::size_t> cells;  // ascending
  std::size_t centroid = 0;
};

/// Free cells 4-adjacent to an unknown cell, grouped into 8-connected
/// clusters. Clusters smaller than `min_size` are dropped. Ordered by size
/// (largest first), then by lowest member index.
inline std::vector<Frontier> find_frontiers(const PlanningGrid& g, std::size_t min_size = 3) {
  const std::size_t n = g.size();
  std::vector<char> edge(n, 0);
  bool any_free = false;
  for (std::size_t i = 0; i < n; ++i) {
    if (!g.is_free(i)) continue;
    any_free = true;
    const std::int32_t x = g.x_of(i), y = g.y_of(i);
    constexpr std::int32_t dx[4] = {1, -1, 0, 0}, dy[4] = {0, 0, 1, -1};
    for (int d = 0; d < 4; ++d) {
      const std::int32_t u = x + dx[d], v = y + dy[d];
      if (g.contains(u, v) && g.at(g.index(u, v)) == CellLabel::Unknown) {
        edge[i] = 1;
        break;
      }
    }
  }
  if (!any_free) throw NoFrontiers("map has no known free cell");
  std::vector<Frontier> out;
  std::vector<char> seen(n, 0);
  for (std::size_t s = 0; s < n; ++s) {
    if (!edge[s] || seen[s]) continue;
    Frontier fr;
    std::vector<std::size_t> stack{s};
    seen[s] = 1;
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      fr.cells.push_back(i);
      for (std::int32_t dy = -1; dy <= 1; ++dy) {
        for (std::int32_t dx = -1; dx <= 1; ++dx) {
          const std::int32_t u = g.x_of(i) + dx, v = g.y_of(i) + dy;
          if ((dx == 0 && dy == 0) || !g.contains(u, v)) continue;
          const std::size_t j = g.index(u, v);
          if (edge[j] && !seen[j]) {
            seen[j] = 1;
            stack.push_back(j);
          }
        }
      }
    }
    if (fr.cells.size() < min_size) continue;
    std::sort(fr.cells.begin(), fr.cells.end());
    double cx = 0.0, cy = 0.0;
    for (std::size_t i : fr.cells) {
      cx += g.x_of(i);
      cy += g.y_of(i);
    }
    cx /= static_cast<double>(fr.cells.size());
    cy /= static_cast<double>(fr.cells.size());
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i : fr.cells) {
      const double d = std::hypot(g.x_of(i) - cx, g.y_of(i) - cy);
      if (d < best) {
        best = d;
        fr.centroid = i;
      }
    }
    out.push_back(std::move(fr));
  }
  std::stable_sort(out.begin(), out.end(), [](const Frontier& a, const Frontier& b) {
    if (a.cells.size() != b.cells.size()) return a.cells.size() > b.cells.size();
    return a.cells.front() < b.cells.front();
  });
  if (out.empty()) throw NoFrontiers("no frontier of at least " + std::to_string(min_size) + " cells");
  return out;
}

struct Path {
  std::vector<std::size_t> cells;
  double cost = 0.0;  // metres; a zero-length path costs one resolution unit
};

/// A* over 8-connected free cells with Euclidean edge costs. Diagonal moves
/// need both side cells free. The start cell is always enterable.
inline Path plan_path(const PlanningGrid& g, std::size_t start, std::size_t goal) {
  if (start >= g.size() || goal >= g.size()) throw IndexOutOfRange("path endpoint outside grid");
  if (start == goal) return {{start}, g.resolution};
  if (!g.is_free(goal)) throw Unreachable("goal cell is not free");
  const std::size_t n = g.size();
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> cost(n, kInf);
  std::vector<std::size_t> parent(n, n);
  std::vector<char> closed(n, 0);
  const double gx = g.x_of(goal), gy = g.y_of(goal);
  auto heuristic = [&](std::size_t i) { return std::hypot(g.x_of(i) - gx, g.y_of(i) - gy); };
  using Entry = std::pair<double, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
  cost[start] = 0.0;
  open.push({heuristic(start), start});
  while (!open.empty()) {
    const std::size_t i = open.top().second;
    open.pop();
    if (closed[i]) continue;
    closed[i] = 1;
    if (i == goal) break;
    const std::int32_t x = g.x_of(i), y = g.y_of(i);
    for (std::int32_t dy = -1; dy <= 1; ++dy) {
      for (std::int32_t dx = -1; dx <= 1; ++dx) {
        if (dx == 0 && dy == 0) continue;
        const std::int32_t u = x + dx, v = y + dy;
        if (!g.contains(u, v)) continue;
        const std::size_t j = g.index(u, v);
        if (!g.is_free(j) || closed[j]) continue;
        if (dx != 0 && dy != 0 && (!g.is_free(g.index(u, y)) || !g.is_free(g.index(x, v)))) continue;
        const double c = cost[i] + (dx != 0 && dy != 0 ? std::numbers::sqrt2 : 1.0);
        if (c < cost[j]) {
          cost[j] = c;
          parent[j] = i;
          open.push({c + heuristic(j), j});
        }
      }
    }
  }
  if (!closed[goal]) throw Unreachable("no free path to goal");
  Path p;
  for (std::size_t i = goal; i != n; i = parent[i]) p.cells.push_back(i);
  std::reverse(p.cells.begin(), p.cells.end());
  p.cost = cost[goal] * g.resolution;
  return p;
}

/// Planar fan of beams around a heading, optionally repeated at several
/// elevation angles.
struct BeamFan {
  int num_beams = 24;
  double fov_deg = 360.0;
  double max_range = 5.0;
  std::vector<double> elevations_deg{0.0};

  std::vector<Vec3> directions(double heading) const {
    if (num_beams < 1) throw InvalidArgument("beam fan needs at least one beam");
    std::vector<Vec3> out;
    const double fov = fov_deg * std::numbers::pi / 180.0;
    for (double el_deg : elevations_deg) {
      const double el = el_deg * std::numbers::pi / 180.0;
      for (int b = 0; b < num_beams; ++b) {
        double a;
        if (fov_deg >= 360.0) {
          a = heading + 2.0 * std::numbers::pi * b / num_beams;
        } else if (num_beams == 1) {
          a = heading;
        } else {
          a = heading - fov / 2.0 + fov * b / (num_beams - 1);
        }
        out.push_back({std::cos(el) * std::cos(a), std::cos(el) * std::sin(a), std::sin(el)});
      }
    }
    return out;
  }

  std::vector<BeamMeasurement> beams(const Vec3& origin, double heading) const {
    std::vector<BeamMeasurement> out;
    for (const Vec3& d : directions(heading)) out.push_back({origin, d, max_range, 0, max_range});
    return out;
  }
};

struct SensingPose {
  Vec3 position;
  double heading = 0.0;
};

/// Every `stride`-th waypoint after the start plus the final one; headings
/// follow the incoming path segment.
inline std::vector<SensingPose> sensing_poses(const PlanningGrid& g, const Path& path, int stride,
                                              double current_heading) {
  if (stride < 1) throw InvalidArgument("sensing stride must be >= 1");
  std::vector<SensingPose> poses;
  const std::size_t n = path.cells.size();
  if (n == 1) {
    poses.push_back({g.center(path.cells[0]), current_heading});
    return poses;
  }
  for (std::size_t i = 1; i < n; ++i) {
    if (i % static_cast<std::size_t>(stride) != 0 && i + 1 != n) continue;
    const Vec3 a = g.center(path.cells[i - 1]);
    const Vec3 b = g.center(path.cells[i]);
    poses.push_back({b, std::atan2(b.y - a.y, b.x - a.x)});
  }
  return poses;
}

enum class Selector { Ssmi, Frontier, FsmiBinary };

inline std::string to_string(Selector s) {
  switch (s) {
    case Selector::Ssmi: return "ssmi";
    case Selector::Frontier: return "frontier";
    case Selector::FsmiBinary: return "fsmi-binary";
  }
  return "?";
}

inline Selector selector_from_string(const std::string& s) {
  if (s == "ssmi") return Selector::Ssmi;
  if (s == "frontier") return Selector::Frontier;
  if (s == "fsmi-binary") return Selector::FsmiBinary;
  throw InvalidArgument("unknown selector '" + s + "'");
}

struct PlannerConfig {
  Selector selector = Selector::Ssmi;
  std::size_t min_frontier_size = 3;
  int pose_stride = 3;
  BeamFan fan{};
  OverlapPolicy overlap = OverlapPolicy::Strict;
  unsigned jobs = 1;
};

struct CandidatePlan {
  std::size_t frontier_index = 0;
  Path path;
  double cost = 0.0;
  double mi = 0.0;
  double score = 0.0;
  std::size_t poses = 0;
  std::size_t beams_total = 0;
  std::size_t beams_kept = 0;
  bool reachable = false;
};

struct PlanResult {
  CandidatePlan chosen;
  std::vector<Frontier> frontiers;
  std::vector<CandidatePlan> candidates;  // one per frontier, same order
};

namespace detail {

/// True when `a` beats `b`: higher score, then lower cost, then lower index.
inline bool better_candidate(const CandidatePlan& a, const CandidatePlan& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.cost != b.cost) return a.cost < b.cost;
  return a.frontier_index < b.frontier_index;
}

template <typename Map>
void evaluate_candidate(const Map& map, const PlanningGrid& g, std::size_t start,
                        double heading, const SensorParams& params,
                        const SensorParams& binary_params, const PlannerConfig& cfg,
                        const Frontier& fr, CandidatePlan& c) {
  try {
    c.path = plan_path(g, start, fr.centroid);
  } catch (const Unreachable&) {
    c.reachable = false;
    return;
  }
  c.reachable = true;
  c.cost = c.path.cost;
  if (cfg.selector == Selector::Frontier) return;
  std::vector<BeamMeasurement> beams;
  const auto poses = sensing_poses(g, c.path, cfg.pose_stride, heading);
  c.poses = poses.size();
  for (const SensingPose& p : poses) {
    for (BeamMeasurement& b : cfg.fan.beams(p.position, p.heading)) beams.push_back(b);
  }
  const bool binary = cfg.selector == Selector::FsmiBinary;
  const TrajectoryMI mi =
      trajectory_mi(map, beams, binary ? binary_params : params, cfg.overlap, binary);
  c.mi = mi.value;
  c.beams_total = mi.beams_total;
  c.beams_kept = mi.beams_kept;
  c.score = c.mi / c.cost;
}

}  // namespace detail

/// Evaluates a path to every frontier and returns the best. `Map` is a
/// GridMap or a SemanticOctree aligned with `g`.
template <typename Map>
PlanResult select_plan(const Map& map, const PlanningGrid& g, std::size_t start, double heading,
                       const SensorParams& params, const PlannerConfig& cfg) {
  PlanResult r;
  r.frontiers = find_frontiers(g, cfg.min_frontier_size);
  r.candidates.resize(r.frontiers.size());
  const SensorParams binary_params = collapse_to_binary(params);
  for (std::size_t f = 0; f < r.frontiers.size(); ++f) r.candidates[f].frontier_index = f;

  const unsigned jobs = std::max(1u, std::min<unsigned>(cfg.jobs, static_cast<unsigned>(r.frontiers.size())));
  auto work = [&](unsigned w) {
    for (std::size_t f = w; f < r.frontiers.size(); f += jobs) {
      detail::evaluate_candidate(map, g, start, heading, params, binary_params, cfg, r.frontiers[f],
                                 r.candidates[f]);
    }
  };
  if (jobs == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < jobs; ++w) pool.emplace_back(work, w);
    for (std::thread& t : pool) t.join();
  }

  const CandidatePlan* best = nullptr;
  for (const CandidatePlan& c : r.candidates) {
    if (!c.reachable) continue;
    if (cfg.selector == Selector::Frontier) {
      // Largest reachable frontier; candidates are already size-ordered.
      best = &c;
      break;
    }
    if (!best || detail::better_candidate(c, *best)) best = &c;
  }
  if (!best) throw AllUnreachable(std::to_string(r.frontiers.size()) + " frontiers, none reachable");
  r.chosen = *best;
  return r;
}

}  // namespace ssmi
