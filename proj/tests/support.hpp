#pragma once

// Independent reference implementations used as test oracles. Nothing here
// calls the library's numeric kernels.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <queue>
#include <random>
#include <vector>

#include "ssmi/geometry.hpp"
#include "ssmi/logodds.hpp"
#include "ssmi/planner.hpp"

namespace oracle {

using ssmi::LogOddsVector;
using ssmi::SensorParams;

inline std::vector<long double> pmf(const std::vector<long double>& h) {
  long double m = h[0];
  for (long double x : h) m = std::max(m, x);
  long double z = 0;
  for (long double x : h) z += std::exp(x - m);
  std::vector<long double> p(h.size());
  for (std::size_t k = 0; k < h.size(); ++k) p[k] = std::exp(h[k] - m) / z;
  return p;
}

inline std::vector<long double> widen(const LogOddsVector& v) { return {v.values().begin(), v.values().end()}; }

/// KL(sigma(q) || sigma(p)) by the textbook sum.
inline long double kl(const std::vector<long double>& q, const std::vector<long double>& p) {
  const auto pq = pmf(q), pp = pmf(p);
  long double s = 0;
  for (std::size_t k = 0; k < q.size(); ++k) {
    if (pq[k] > 0) s += pq[k] * std::log(pq[k] / pp[k]);
  }
  return s;
}

struct Cell {
  LogOddsVector h, h0;
};

struct BeamOutcomes {
  long double hit_information = 0;  // sum over hit outcomes of p * information
  long double miss_probability = 0;
  long double miss_information = 0;
  long double total_probability = 0;
};

/// Enumerates every (first hit n, class y) outcome of one beam plus the
/// all-free outcome. Posteriors are unclamped h + l - h0.
inline BeamOutcomes beam_outcomes(const std::vector<Cell>& cells, const SensorParams& params) {
  BeamOutcomes out;
  const std::size_t k_max = params.num_classes();
  auto update = [](const Cell& c, const std::vector<long double>& l) {
    std::vector<long double> post = widen(c.h);
    const auto h0 = widen(c.h0);
    for (std::size_t k = 0; k < post.size(); ++k) post[k] += l[k] - h0[k];
    return post;
  };
  const auto phi_minus = widen(params.phi_minus);
  long double free_prefix = 1, free_info = 0;
  for (std::size_t n = 0; n < cells.size(); ++n) {
    const auto p = pmf(widen(cells[n].h));
    for (std::size_t y = 1; y <= k_max; ++y) {
      auto l = widen(params.phi_plus);
      l[y] += params.psi_plus[y];
      const long double prob = free_prefix * p[y];
      const long double info = free_info + kl(update(cells[n], l), widen(cells[n].h));
      out.hit_information += prob * info;
      out.total_probability += prob;
    }
    free_prefix *= p[0];
    free_info += kl(update(cells[n], phi_minus), widen(cells[n].h));
  }
  out.miss_probability = free_prefix;
  out.miss_information = free_prefix * free_info;
  out.total_probability += free_prefix;
  return out;
}

/// Relative error against a reference.
inline double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

/// Cells of a 2-D or 3-D frame whose interior the segment crosses, ordered by
/// entry parameter. Slab test on every cell of the bounding box.
inline std::vector<ssmi::GridKey> supercover(const ssmi::GridFrame& f, const ssmi::Vec3& o, const ssmi::Vec3& d,
                                             double length, double min_chord = 1e-12) {
  struct Hit {
    double t;
    ssmi::GridKey k;
  };
  std::vector<Hit> hits;
  for (std::int32_t z = 0; z < f.dims[2]; ++z) {
    for (std::int32_t y = 0; y < f.dims[1]; ++y) {
      for (std::int32_t x = 0; x < f.dims[0]; ++x) {
        double t0 = 0.0, t1 = length;
        const std::int32_t key[3] = {x, y, z};
        bool ok = true;
        for (int a = 0; a < 3 && ok; ++a) {
          const double lo = f.origin[a] + key[a] * f.resolution, hi = lo + f.resolution;
          if (d[a] == 0.0) {
            if (!(o[a] >= lo && o[a] < hi)) ok = false;
            continue;
          }
          double ta = (lo - o[a]) / d[a], tb = (hi - o[a]) / d[a];
          if (ta > tb) std::swap(ta, tb);
          t0 = std::max(t0, ta);
          t1 = std::min(t1, tb);
        }
        if (ok && t1 - t0 > min_chord) hits.push_back({t0, {x, y, z}});
      }
    }
  }
  std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) { return a.t < b.t; });
  std::vector<ssmi::GridKey> out;
  for (const Hit& h : hits) out.push_back(h.k);
  return out;
}

/// Plain Dijkstra with the same move rules as the planner.
inline double dijkstra(const ssmi::PlanningGrid& g, std::size_t s, std::size_t t) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(g.size(), inf);
  using E = std::pair<double, std::size_t>;
  std::priority_queue<E, std::vector<E>, std::greater<>> q;
  dist[s] = 0;
  q.push({0, s});
  while (!q.empty()) {
    auto [c, i] = q.top();
    q.pop();
    if (c > dist[i]) continue;
    const int x = g.x_of(i), y = g.y_of(i);
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        if (!dx && !dy) continue;
        if (!g.contains(x + dx, y + dy)) continue;
        const std::size_t j = g.index(x + dx, y + dy);
        if (!g.is_free(j)) continue;
        if (dx && dy && (!g.is_free(g.index(x + dx, y)) || !g.is_free(g.index(x, y + dy)))) continue;
        const double nc = c + ((dx && dy) ? std::sqrt(2.0) : 1.0);
        if (nc < dist[j]) {
          dist[j] = nc;
          q.push({nc, j});
        }
      }
    }
  }
  return dist[t] * g.resolution;
}

inline LogOddsVector random_h(std::mt19937_64& rng, std::size_t k, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  LogOddsVector h(k);
  for (std::size_t j = 1; j <= k; ++j) h.set(j, u(rng));
  return h;
}

inline SensorParams random_params(std::mt19937_64& rng, std::size_t k, double limit = 6.0) {
  SensorParams p = SensorParams::make_default(k, 0.65, limit);
  p.phi_plus = random_h(rng, k, -2, 2);
  p.phi_minus = random_h(rng, k, -2, 2);
  p.psi_plus = random_h(rng, k, 0, 2);
  return p;
}

}  // namespace oracle
