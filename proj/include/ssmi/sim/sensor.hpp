#pragma once

// Simulated range-category sensor over a ground-truth environment.

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "ssmi/errors.hpp"
#include "ssmi/geometry.hpp"
#include "ssmi/gridmap.hpp"
#include "ssmi/planner.hpp"
#include "ssmi/sim/environment.hpp"
#include "ssmi/sim/rng.hpp"

namespace ssmi::sim {

struct SensorSpec {
  int num_beams = 90;
  double fov_deg = 360.0;
  double max_range = 5.0;   // m
  double range_noise = 0.1;  // standard deviation, m
  double misclassification = 0.35;
  std::vector<double> elevations_deg{0.0};

  void validate() const {
    if (num_beams < 1) throw InvalidArgument("sensor needs at least one beam");
    if (!(max_range > 0.0)) throw InvalidArgument("max range must be positive");
    if (!(range_noise >= 0.0)) throw InvalidArgument("range noise must be >= 0");
    if (!(misclassification >= 0.0 && misclassification < 1.0)) {
      throw InvalidArgument("misclassification must lie in [0, 1)");
    }
    if (!(fov_deg > 0.0 && fov_deg <= 360.0)) throw InvalidArgument("fov must lie in (0, 360]");
  }

  BeamFan fan() const { return {num_beams, fov_deg, max_range, elevations_deg}; }
};

struct Pose {
  Vec3 position;
  double heading = 0.0;  // radians about +z
};

struct TruthReturn {
  bool hit = false;
  double range = 0.0;
  ClassId category = 0;
};

/// First occupied cell along the ray, found with the same voxel walk the
/// mapper uses; the range is the entry distance into that cell. Leaving the
/// environment counts as no return.
inline TruthReturn cast_truth(const Environment& env, const Vec3& origin, const Vec3& dir,
                              double max_range) {
  const Traversal walk = traverse(env.frame, origin, dir, max_range);
  for (const TraversedCell& c : walk.cells) {
    const ClassId cls = env.at(c.key);
    if (cls != 0) return {true, c.t_entry, cls};
  }
  return {false, max_range, 0};
}

/// One noisy scan. Ranges get additive Gaussian noise and are clipped to
/// [0, r_max]; a clipped-to-max return carries no class. A hit reports the
/// true class with probability 1 - eps, else a uniformly drawn wrong class.
inline std::vector<BeamMeasurement> sense(const Environment& env, const Pose& pose,
                                          const SensorSpec& spec, Rng& rng) {
  spec.validate();
  if (!env.frame.contains(pose.position)) throw PoseInObstacle("pose outside environment");
  if (!env.is_free(env.frame.index(env.frame.key_of(pose.position)))) {
    throw PoseInObstacle("pose inside an occupied cell");
  }
  std::normal_distribution<double> noise(0.0, spec.range_noise > 0.0 ? spec.range_noise : 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<BeamMeasurement> out;
  for (const Vec3& d : spec.fan().directions(pose.heading)) {
    const TruthReturn t = cast_truth(env, pose.position, d, spec.max_range);
    BeamMeasurement b{pose.position, d, spec.max_range, 0, spec.max_range};
    if (t.hit) {
      double r = t.range;
      if (spec.range_noise > 0.0) r += noise(rng);
      r = std::clamp(r, 0.0, spec.max_range);
      ClassId y = t.category;
      if (env.num_classes > 1 && spec.misclassification > 0.0 && unit(rng) < spec.misclassification) {
        std::uniform_int_distribution<std::size_t> wrong(1, env.num_classes - 1);
        const std::size_t pick = wrong(rng);
        y = static_cast<ClassId>(pick >= t.category ? pick + 1 : pick);
      }
      if (r < spec.max_range) {
        b.range = r;
        b.category = y;
      }
    }
    out.push_back(b);
  }
  return out;
}

}  // namespace ssmi::sim
