#pragma once

// Run count Q versus element count N of octree ray casts across map
// resolutions, on a corridor scene whose structure is resolution independent.

#include <chrono>
#include <cmath>
#include <numbers>
#include <ostream>
#include <random>
#include <vector>

#include "ssmi/octree.hpp"
#include "ssmi/planner.hpp"
#include "ssmi/sim/config.hpp"
#include "ssmi/sim/episode.hpp"
#include "ssmi/sim/rng.hpp"

namespace ssmi::sim {

/// 16 m cube. A corridor of saturated free space runs along x through
/// y in [6, 10), z in [1, 4), wrapped in a one-metre shell of one saturated
/// occupied class; everything else holds the prior.
struct CorridorScene {
  static constexpr double kExtent = 16.0;

  static SemanticOctree build(int elements_per_metre, std::size_t num_classes, const SensorParams& params) {
    if (elements_per_metre < 1 || (elements_per_metre & (elements_per_metre - 1)) != 0) {
      throw InvalidArgument("elements per metre must be a power of two");
    }
    int depth = 0;
    while ((1 << depth) < 16 * elements_per_metre) ++depth;
    SemanticOctree tree(depth, 1.0 / elements_per_metre, {0.0, 0.0, 0.0}, LogOddsVector(num_classes), params);
    const std::int32_t r = elements_per_metre, side = tree.side();
    LogOddsVector free_h(num_classes), wall_h(num_classes);
    for (std::size_t k = 1; k <= num_classes; ++k) {
      free_h.set(k, params.clamp_lo[k]);
      wall_h.set(k, k == 1 ? params.clamp_hi[k] : params.clamp_lo[k]);
    }
    const TruncatedSemantics wall = TruncatedSemantics::from_full(wall_h);
    const TruncatedSemantics free = TruncatedSemantics::from_full(free_h);
    tree.set_box({0, 5 * r, 0}, {side, 11 * r, 5 * r}, wall);
    tree.set_box({0, 6 * r, 1 * r}, {side, 10 * r, 4 * r}, free);
    tree.prune();
    return tree;
  }

  static bool in_corridor(const Vec3& p) {
    return p.y >= 6.0 && p.y < 10.0 && p.z >= 1.0 && p.z < 4.0;
  }
};

struct StudyRow {
  int elements_per_metre = 0;
  int depth = 0;
  std::size_t rays = 0;
  double mean_q = 0.0, std_q = 0.0;
  double mean_n = 0.0, std_n = 0.0;
  double mean_leaves = 0.0;
  std::size_t max_q = 0;
  bool q_le_n = true;  // held for every ray
  double seconds = 0.0;
};

/// Casts fans from random corridor poses. Every resolution sees the same
/// poses, drawn from the "study" stream of `seed`.
inline std::vector<StudyRow> srle_study(const StudySpec& spec, const SensorParams& params, std::uint64_t seed) {
  if (spec.iterations < 1 || spec.poses_per_iteration < 1) throw InvalidArgument("study needs iterations and poses");
  const std::size_t k = params.num_classes();
  Rng rng = RngStreams(seed).stream("study");
  std::uniform_real_distribution<double> ux(1.0, 15.0), uy(6.25, 9.75), uz(1.25, 3.75), uh(0.0, 2.0 * std::numbers::pi);
  std::vector<Pose> poses;
  for (int i = 0; i < spec.iterations * spec.poses_per_iteration; ++i) {
    const double x = ux(rng), y = uy(rng), z = uz(rng);
    poses.push_back({{x, y, z}, uh(rng)});
  }
  const BeamFan fan{spec.num_beams, 360.0, spec.max_range, spec.elevations_deg};

  std::vector<StudyRow> rows;
  for (int res : spec.resolutions) {
    const SemanticOctree tree = CorridorScene::build(res, k, params);
    StudyRow row;
    row.elements_per_metre = res;
    row.depth = tree.max_depth();
    double sq = 0.0, sq2 = 0.0, sn = 0.0, sn2 = 0.0, sl = 0.0;
    const auto t0 = std::chrono::steady_clock::now();
    for (const Pose& p : poses) {
      for (const BeamMeasurement& b : fan.beams(p.position, p.heading)) {
        RaycastStats stats;
        const SrleRay ray = tree.raycast_srle(b, &stats);
        const double q = static_cast<double>(ray.run_count());
        const double n = static_cast<double>(ray.element_count());
        sq += q;
        sq2 += q * q;
        sn += n;
        sn2 += n * n;
        sl += static_cast<double>(stats.leaves);
        row.max_q = std::max(row.max_q, ray.run_count());
        if (ray.run_count() > ray.element_count()) row.q_le_n = false;
        ++row.rays;
      }
    }
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const double m = static_cast<double>(row.rays);
    row.mean_q = sq / m;
    row.mean_n = sn / m;
    row.mean_leaves = sl / m;
    row.std_q = std::sqrt(std::max(0.0, sq2 / m - row.mean_q * row.mean_q));
    row.std_n = std::sqrt(std::max(0.0, sn2 / m - row.mean_n * row.mean_n));
    rows.push_back(row);
  }
  return rows;
}

inline void write_study_csv(std::ostream& os, const std::vector<StudyRow>& rows, std::uint64_t cfg_hash) {
  os << "# config-hash: " << hex64(cfg_hash) << "\n";
  os << "elements_per_metre,depth,rays,mean_q,std_q,max_q,mean_n,std_n,mean_leaves,seconds\n";
  for (const StudyRow& r : rows) {
    os << r.elements_per_metre << ',' << r.depth << ',' << r.rays << ',' << format_g(r.mean_q) << ','
       << format_g(r.std_q) << ',' << r.max_q << ',' << format_g(r.mean_n) << ',' << format_g(r.std_n)
       << ',' << format_g(r.mean_leaves) << ',' << format_g(r.seconds) << "\n";
  }
}

}  // namespace ssmi::sim
