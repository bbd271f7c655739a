#pragma once

// Semantic run-length encoding of a ray: consecutive cells with identical
// beliefs collapse into one (width, belief, prior) run.

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include "ssmi/logodds.hpp"

namespace ssmi {

/// View of one cell along a ray: current belief h_t and prior h_0.
struct RayCell {
  std::span<const double> belief;
  std::span<const double> prior;
};

struct SrleRun {
  std::uint32_t width = 0;  // element count
  LogOddsVector belief;
  LogOddsVector prior;
  friend bool operator==(const SrleRun&, const SrleRun&) = default;
};

struct SrleRay {
  std::vector<SrleRun> runs;

  std::size_t run_count() const { return runs.size(); }
  std::size_t element_count() const {
    std::size_t n = 0;
    for (const SrleRun& r : runs) n += r.width;
    return n;
  }

  /// Appends one element, extending the last run when both belief and prior
  /// match exactly.
  void push(std::span<const double> belief, std::span<const double> prior) {
    if (!runs.empty()) {
      SrleRun& last = runs.back();
      if (std::equal(belief.begin(), belief.end(), last.belief.values().begin(),
                     last.belief.values().end()) &&
          std::equal(prior.begin(), prior.end(), last.prior.values().begin(),
                     last.prior.values().end())) {
        ++last.width;
        return;
      }
    }
    runs.push_back({1, LogOddsVector::from_values({belief.begin(), belief.end()}),
                    LogOddsVector::from_values({prior.begin(), prior.end()})});
  }

  void push(const LogOddsVector& belief, const LogOddsVector& prior, std::uint32_t width = 1) {
    if (width == 0) return;
    if (!runs.empty() && runs.back().belief == belief && runs.back().prior == prior) {
      runs.back().width += width;
      return;
    }
    runs.push_back({width, belief, prior});
  }

  friend bool operator==(const SrleRay&, const SrleRay&) = default;
};

inline SrleRay encode(std::span<const RayCell> cells) {
  SrleRay ray;
  for (const RayCell& c : cells) ray.push(c.belief, c.prior);
  return ray;
}

/// Per-element cells of an encoded ray; the views point into `ray`.
inline std::vector<RayCell> expand(const SrleRay& ray) {
  std::vector<RayCell> cells;
  cells.reserve(ray.element_count());
  for (const SrleRun& r : ray.runs) {
    for (std::uint32_t i = 0; i < r.width; ++i) cells.push_back({r.belief.values(), r.prior.values()});
  }
  return cells;
}

}  // namespace ssmi
