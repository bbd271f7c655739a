#pragma once

// Dense regular-grid multi-class map. 2-D maps are frames with dims[2] == 1.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ssmi/errors.hpp"
#include "ssmi/geometry.hpp"
#include "ssmi/logodds.hpp"

namespace ssmi {

/// One range-category return. `category` is ignored when range == max_range.
struct BeamMeasurement {
  Vec3 origin;
  Vec3 direction;  // unit length
  double range = 0.0;
  ClassId category = 0;
  double max_range = 0.0;

  bool is_hit() const { return range < max_range; }

  void validate() const {
    if (!(range >= 0.0 && range <= max_range)) {
      throw InvalidArgument("beam range " + std::to_string(range) + " outside [0, " +
                            std::to_string(max_range) + "]");
    }
    if (std::abs(direction.norm() - 1.0) > 1e-9) throw InvalidArgument("beam direction not unit");
  }
};

/// Cells traversed by one beam out to its maximum range.
struct RayTrace {
  std::vector<std::size_t> cell_indices;
  std::vector<double> chord_lengths;  // meters; informational only
  std::optional<std::size_t> hit_index;  // position in cell_indices

  std::size_t size() const { return cell_indices.size(); }
};

class GridMap {
 public:
  GridMap(GridFrame frame, LogOddsVector prior)
      : frame_(frame), prior_(std::move(prior)), stride_(prior_.size()) {
    for (int a = 0; a < 3; ++a) {
      if (frame_.dims[a] < 1) throw BadDims("grid extents must be positive");
    }
    if (!(frame_.resolution > 0.0)) throw BadDims("resolution must be positive");
    data_.resize(frame_.cell_count() * stride_);
    for (std::size_t i = 0; i < frame_.cell_count(); ++i) {
      std::copy(prior_.values().begin(), prior_.values().end(), data_.begin() + i * stride_);
    }
  }

  const GridFrame& frame() const { return frame_; }
  const LogOddsVector& prior() const { return prior_; }
  std::size_t num_classes() const { return prior_.num_classes(); }
  std::size_t cell_count() const { return frame_.cell_count(); }

  std::span<const double> cell(std::size_t index) const {
    return {data_.data() + index * stride_, stride_};
  }
  std::span<const double> cell(const GridKey& key) const { return cell(frame_.index(key)); }

  LogOddsVector value(std::size_t index) const {
    const auto c = cell(index);
    return LogOddsVector::from_values({c.begin(), c.end()});
  }

  void set(std::size_t index, const LogOddsVector& h) {
    if (h.size() != stride_) throw ClassCountMismatch("cell value has wrong class count");
    std::copy(h.values().begin(), h.values().end(), data_.begin() + index * stride_);
  }

  /// A cell is unknown while it still holds exactly the prior.
  bool is_observed(std::size_t index) const {
    const auto c = cell(index);
    const auto p = prior_.values();
    return !std::equal(c.begin(), c.end(), p.begin());
  }

  /// Most likely class; the lowest index wins ties.
  ClassId most_likely_class(std::size_t index) const {
    const auto c = cell(index);
    std::size_t best = 0;
    for (std::size_t k = 1; k < c.size(); ++k) {
      if (c[k] > c[best]) best = k;
    }
    return static_cast<ClassId>(best);
  }

  /// Applies h <- clamp(h + (l - h0)) to one cell.
  void apply(std::size_t index, const LogOddsVector& l, const SensorParams& params) {
    double* c = data_.data() + index * stride_;
    for (std::size_t k = 1; k < stride_; ++k) {
      c[k] = clamp_element(c[k] + (l[k] - prior_[k]), k, params);
    }
  }

 private:
  GridFrame frame_;
  LogOddsVector prior_;
  std::size_t stride_;
  std::vector<double> data_;
};

/// Cells a beam passes through out to max_range. The geometry depends only on
/// the ray; the range only decides which listed cell (if any) is the hit.
inline RayTrace cast_ray(const GridFrame& frame, const BeamMeasurement& beam) {
  const Traversal walk = traverse(frame, beam.origin, beam.direction, beam.max_range);
  RayTrace trace;
  trace.cell_indices.reserve(walk.cells.size());
  trace.chord_lengths.reserve(walk.cells.size());
  for (std::size_t i = 0; i < walk.cells.size(); ++i) {
    const TraversedCell& c = walk.cells[i];
    trace.cell_indices.push_back(frame.index(c.key));
    trace.chord_lengths.push_back(c.t_exit - c.t_entry);
    if (beam.is_hit() && !trace.hit_index && c.t_entry <= beam.range && beam.range < c.t_exit) {
      trace.hit_index = i;
    }
  }
  return trace;
}

inline RayTrace cast_ray(const GridMap& map, const BeamMeasurement& beam) {
  return cast_ray(map.frame(), beam);
}

/// Free update on every cell before the endpoint, hit update on the endpoint,
/// nothing beyond it.
inline void integrate(GridMap& map, const BeamMeasurement& beam, const SensorParams& params) {
  beam.validate();
  const RayTrace trace = cast_ray(map, beam);
  const std::size_t free_end = trace.hit_index ? *trace.hit_index : trace.size();
  for (std::size_t i = 0; i < free_end; ++i) map.apply(trace.cell_indices[i], params.phi_minus, params);
  if (trace.hit_index) {
    const LogOddsVector hit =
        inverse_observation(CellRelation::Occupied, beam.category, map.prior(), params);
    map.apply(trace.cell_indices[*trace.hit_index], hit, params);
  }
}

namespace detail {

inline double softmax_element(std::span<const double> h, std::size_t k) {
  double m = h[0];
  for (double x : h) m = std::max(m, x);
  double z = 0.0;
  for (double x : h) z += std::exp(x - m);
  return std::exp(h[k] - m) / z;
}

}  // namespace detail

/// Probability that the n-th cell (1-based) is the first non-free cell and
/// has class y.
inline double beam_likelihood(const GridMap& map, const RayTrace& trace, std::size_t n,
                              ClassId y) {
  if (n < 1 || n > trace.size()) {
    throw IndexOutOfRange("range bin " + std::to_string(n) + " outside 1.." +
                          std::to_string(trace.size()));
  }
  if (y < 1 || y > map.num_classes()) throw InvalidClass("class " + std::to_string(y));
  double p = detail::softmax_element(map.cell(trace.cell_indices[n - 1]), y);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    p *= detail::softmax_element(map.cell(trace.cell_indices[i]), 0);
  }
  return p;
}

/// Summed per-cell entropy over `region` (all cells when empty optional).
inline double map_entropy(const GridMap& map,
                          std::optional<std::span<const std::size_t>> region = std::nullopt) {
  double total = 0.0;
  auto cell_entropy = [&](std::size_t i) {
    const auto c = map.cell(i);
    double m = c[0];
    for (double x : c) m = std::max(m, x);
    double z = 0.0;
    for (double x : c) z += std::exp(x - m);
    const double log_z = std::log(z);
    double e = 0.0;
    for (double x : c) {
      const double log_p = x - m - log_z;
      const double p = std::exp(log_p);
      if (p > 0.0) e -= p * log_p;
    }
    return e;
  };
  if (region) {
    for (std::size_t i : *region) total += cell_entropy(i);
  } else {
    for (std::size_t i = 0; i < map.cell_count(); ++i) total += cell_entropy(i);
  }
  return total;
}

}  // namespace ssmi
