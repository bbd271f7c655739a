#pragma once

// Mutual information of a whole sensing horizon: cast every beam, keep a
// cell-disjoint subset, sum the per-beam values.

#include <span>
#include <vector>

#include "ssmi/gridmap.hpp"
#include "ssmi/mutual_info.hpp"
#include "ssmi/octree.hpp"

namespace ssmi {

/// Which cells count when testing two beams for overlap.
enum class OverlapPolicy {
  Strict,        // every traversed cell
  IgnoreOrigin,  // the sensor's own cell is shared by a whole scan and is skipped
  None,          // no filtering; the sum is no longer a lower bound
};

struct TrajectoryMI {
  double value = 0.0;
  std::size_t beams_total = 0;
  std::size_t beams_kept = 0;
  bool approximate = false;  // octree with K > 3 lumps classes

  std::size_t beams_dropped() const { return beams_total - beams_kept; }
};

namespace detail {

inline std::vector<std::size_t> filter_beams(std::vector<RayTrace> traces, OverlapPolicy policy) {
  std::vector<std::size_t> kept;
  if (policy == OverlapPolicy::None) {
    for (std::size_t i = 0; i < traces.size(); ++i) kept.push_back(i);
    return kept;
  }
  if (policy == OverlapPolicy::IgnoreOrigin) {
    for (RayTrace& t : traces) {
      if (!t.cell_indices.empty()) t.cell_indices.erase(t.cell_indices.begin());
    }
  }
  return select_nonoverlapping(traces);
}

}  // namespace detail

/// `beams` are ordered by pose, then by beam index; that order drives the
/// greedy selection. Range and category of the beams are ignored. With
/// `binary` set every belief is collapsed to occupied/free first and
/// `params` must be a binary (K = 1) model.
inline TrajectoryMI trajectory_mi(const GridMap& map, std::span<const BeamMeasurement> beams,
                                  const SensorParams& params,
                                  OverlapPolicy policy = OverlapPolicy::Strict,
                                  bool binary = false) {
  std::vector<RayTrace> traces;
  traces.reserve(beams.size());
  for (const BeamMeasurement& b : beams) traces.push_back(cast_ray(map, b));
  TrajectoryMI out;
  out.beams_total = beams.size();
  for (std::size_t i : detail::filter_beams(traces, policy)) {
    if (binary) {
      const LogOddsVector prior = collapse_to_binary(map.prior());
      std::vector<LogOddsVector> beliefs;
      beliefs.reserve(traces[i].size());
      for (std::size_t c : traces[i].cell_indices) {
        beliefs.push_back(collapse_to_binary(map.value(c)));
      }
      std::vector<RayCell> cells;
      for (const LogOddsVector& b : beliefs) cells.push_back({b.values(), prior.values()});
      out.value += beam_mi_dense(cells, params).value;
    } else {
      const std::vector<RayCell> cells = ray_cells(map, traces[i]);
      out.value += beam_mi_dense(cells, params).value;
    }
    ++out.beams_kept;
  }
  return out;
}

inline TrajectoryMI trajectory_mi(const SemanticOctree& tree, std::span<const BeamMeasurement> beams,
                                  const SensorParams& params,
                                  OverlapPolicy policy = OverlapPolicy::Strict,
                                  bool binary = false) {
  std::vector<RayTrace> traces;
  traces.reserve(beams.size());
  for (const BeamMeasurement& b : beams) traces.push_back(cast_ray(tree.frame(), b));
  TrajectoryMI out;
  out.beams_total = beams.size();
  out.approximate = !binary && tree.num_classes() > kTrackedClasses;
  for (std::size_t i : detail::filter_beams(traces, policy)) {
    SrleRay ray = tree.raycast_srle(beams[i]);
    if (binary) {
      SrleRay collapsed;
      for (const SrleRun& r : ray.runs) {
        collapsed.push(collapse_to_binary(r.belief), collapse_to_binary(r.prior), r.width);
      }
      ray = std::move(collapsed);
    }
    out.value += beam_mi_srle(ray, params).value;
    ++out.beams_kept;
  }
  return out;
}

}  // namespace ssmi
