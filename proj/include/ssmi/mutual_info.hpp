#pragma once

// Closed-form Shannon mutual information between one range-category beam and
// the map cells it traverses: dense per-cell form, run-length form, and a
// brute-force outcome-tree oracle.

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "ssmi/errors.hpp"
#include "ssmi/gridmap.hpp"
#include "ssmi/logodds.hpp"
#include "ssmi/srle.hpp"

namespace ssmi {

/// One (position, class) term of a beam MI sum. `position` is the cell index
/// n for the dense form and the run index q for the run-length form.
struct MiTerm {
  std::size_t position = 0;
  ClassId k = 0;
  double probability = 0.0;  // p(n,k) or rho(q,k)
  double accumulated = 0.0;  // C(n,k) or Theta(q,k)
  double term = 0.0;
};

struct BeamMI {
  double value = 0.0;
  std::vector<MiTerm> terms;  // filled only on request
};

namespace detail {

struct CellStats {
  double log_free = 0.0;  // ln sigma_0(h)
  std::vector<double> prob;  // sigma(h), length K+1
};

inline CellStats cell_stats(std::span<const double> h) {
  CellStats s;
  s.prob.resize(h.size());
  double m = h[0];
  for (double x : h) m = std::max(m, x);
  double z = 0.0;
  for (std::size_t j = 0; j < h.size(); ++j) {
    s.prob[j] = std::exp(h[j] - m);
    z += s.prob[j];
  }
  for (double& p : s.prob) p /= z;
  if (m == 0.0) {
    // Pivot dominates: ln sigma_0 = -log1p(sum_{k>0} e^{h_k}) keeps full
    // relative precision when the occupied mass is tiny.
    double occ = 0.0;
    for (std::size_t j = 1; j < h.size(); ++j) occ += std::exp(h[j]);
    s.log_free = -std::log1p(occ);
  } else {
    s.log_free = -(m + std::log(z));
  }
  return s;
}

/// Occupied probability mass 1 - sigma_0 summed directly.
inline double occupied_mass(const CellStats& s) {
  double q = 0.0;
  for (std::size_t j = 1; j < s.prob.size(); ++j) q += s.prob[j];
  return q;
}

inline double f_free(const SensorParams& params, std::span<const double> h,
                     std::span<const double> h0) {
  const auto phi = params.phi_minus.values();
  return log_ratio_kernel([&](std::size_t j) { return phi[j] - h0[j]; }, h);
}

inline double f_hit(const SensorParams& params, std::size_t k, std::span<const double> h,
                    std::span<const double> h0) {
  const auto phi = params.phi_plus.values();
  const auto psi = params.psi_plus.values();
  return log_ratio_kernel(
      [&](std::size_t j) { return phi[j] + (j == k ? psi[j] : 0.0) - h0[j]; }, h);
}

inline void check_cell(std::span<const double> h, std::span<const double> h0,
                       const SensorParams& params) {
  if (h.size() != params.phi_plus.size() || h0.size() != h.size()) {
    throw ClassCountMismatch("ray cell length does not match sensor parameters");
  }
}

/// Sums over a run of w identical cells with free probability x = 1 - q:
///   g1 = sum_{j<w} x^j,  g2 = sum_{j<w} j x^j.
/// Near x = 1 the closed forms are 0/0, so a binomial series in q is used
/// instead; it reduces to w and w(w-1)/2 at q = 0.
struct GeometricSums {
  double g1 = 0.0;
  double g2 = 0.0;
};

inline GeometricSums geometric_sums(double w, double q, double log_x) {
  GeometricSums g;
  if (w * q >= 0.1) {
    const double xw1 = std::exp((w - 1.0) * log_x);
    const double x = std::exp(log_x);
    g.g1 = -std::expm1(w * log_x) / q;
    g.g2 = x * (g.g1 - w * xw1) / q;
    return g;
  }
  // C(w, m+1) and C(w, m+2) carried incrementally.
  double c1 = w;                    // C(w, 1)
  double c2 = w * (w - 1.0) / 2.0;  // C(w, 2)
  double power = 1.0;               // (-q)^m
  for (int m = 0; m < 200; ++m) {
    const double t1 = power * c1;
    const double t2 = power * ((m + 1) * c2 + m * c1);
    g.g1 += t1;
    g.g2 += t2;
    if (std::abs(t1) <= 1e-18 * std::abs(g.g1) && std::abs(t2) <= 1e-18 * std::abs(g.g2)) break;
    if (c1 == 0.0 && c2 == 0.0) break;
    power *= -q;
    c1 = c2;
    c2 = c2 * (w - (m + 2)) / (m + 3);
  }
  return g;
}

}  // namespace detail

/// Dense beam MI, one forward pass: the free-prefix probability and the
/// free-prefix log-ratio sum are carried from cell to cell.
inline BeamMI beam_mi_dense(std::span<const RayCell> cells, const SensorParams& params,
                            bool with_terms = false) {
  if (cells.empty()) throw EmptyRay("beam traverses no cells");
  const std::size_t k_max = params.num_classes();
  BeamMI out;
  double prefix_prob = 1.0;
  double prefix_f = 0.0;
  for (std::size_t n = 0; n < cells.size(); ++n) {
    const auto h = cells[n].belief;
    const auto h0 = cells[n].prior;
    detail::check_cell(h, h0, params);
    const detail::CellStats s = detail::cell_stats(h);
    for (std::size_t k = 1; k <= k_max; ++k) {
      const double p = prefix_prob * s.prob[k];
      const double c = detail::f_hit(params, k, h, h0) + prefix_f;
      out.value += p * c;
      if (with_terms) out.terms.push_back({n + 1, static_cast<ClassId>(k), p, c, p * c});
    }
    prefix_f += detail::f_free(params, h, h0);
    prefix_prob *= s.prob[0];
  }
  return out;
}

/// Dense beam MI summed term by term with every prefix product and prefix sum
/// recomputed from scratch. Quadratic; used to check the recursion.
inline BeamMI beam_mi_dense_direct(std::span<const RayCell> cells, const SensorParams& params) {
  if (cells.empty()) throw EmptyRay("beam traverses no cells");
  BeamMI out;
  for (std::size_t n = 0; n < cells.size(); ++n) {
    detail::check_cell(cells[n].belief, cells[n].prior, params);
    for (std::size_t k = 1; k <= params.num_classes(); ++k) {
      double p = detail::softmax_element(cells[n].belief, k);
      double c = detail::f_hit(params, k, cells[n].belief, cells[n].prior);
      for (std::size_t i = 0; i < n; ++i) {
        p *= detail::softmax_element(cells[i].belief, 0);
        c += detail::f_free(params, cells[i].belief, cells[i].prior);
      }
      out.value += p * c;
    }
  }
  return out;
}

/// Run-length beam MI: each run of w identical cells contributes in closed
/// form, so the work is linear in the number of runs.
inline BeamMI beam_mi_srle(const SrleRay& ray, const SensorParams& params,
                           bool with_terms = false) {
  if (ray.runs.empty()) throw EmptyRay("beam traverses no cells");
  const std::size_t k_max = params.num_classes();
  BeamMI out;
  double log_prefix = 0.0;  // sum_{j<q} w_j ln pi(j,0)
  double prefix_f = 0.0;    // sum_{j<q} w_j f-(j)
  for (std::size_t q = 0; q < ray.runs.size(); ++q) {
    const SrleRun& run = ray.runs[q];
    if (run.width == 0) throw InvalidArgument("run width must be positive");
    const auto h = run.belief.values();
    const auto h0 = run.prior.values();
    detail::check_cell(h, h0, params);
    const detail::CellStats s = detail::cell_stats(h);
    const double w = static_cast<double>(run.width);
    const double f_minus = detail::f_free(params, h, h0);
    const detail::GeometricSums g =
        detail::geometric_sums(w, detail::occupied_mass(s), s.log_free);
    const double prefix_prob = std::exp(log_prefix);
    for (std::size_t k = 1; k <= k_max; ++k) {
      const double rho = prefix_prob * s.prob[k];
      const double beta = detail::f_hit(params, k, h, h0) + prefix_f;
      const double theta = beta * g.g1 + f_minus * g.g2;
      out.value += rho * theta;
      if (with_terms) out.terms.push_back({q + 1, static_cast<ClassId>(k), rho, theta, rho * theta});
    }
    log_prefix += w * s.log_free;
    prefix_f += w * f_minus;
  }
  return out;
}

/// Run-length beam MI with prefix quantities recomputed per run.
inline BeamMI beam_mi_srle_direct(const SrleRay& ray, const SensorParams& params) {
  if (ray.runs.empty()) throw EmptyRay("beam traverses no cells");
  BeamMI out;
  for (std::size_t q = 0; q < ray.runs.size(); ++q) {
    const SrleRun& run = ray.runs[q];
    detail::check_cell(run.belief.values(), run.prior.values(), params);
    double log_prefix = 0.0;
    double beta0 = 0.0;
    for (std::size_t j = 0; j < q; ++j) {
      const SrleRun& prev = ray.runs[j];
      log_prefix += prev.width * detail::cell_stats(prev.belief.values()).log_free;
      beta0 += prev.width * detail::f_free(params, prev.belief.values(), prev.prior.values());
    }
    const detail::CellStats s = detail::cell_stats(run.belief.values());
    const double f_minus = detail::f_free(params, run.belief.values(), run.prior.values());
    const detail::GeometricSums g =
        detail::geometric_sums(run.width, detail::occupied_mass(s), s.log_free);
    for (std::size_t k = 1; k <= params.num_classes(); ++k) {
      const double rho = std::exp(log_prefix) * s.prob[k];
      const double beta = detail::f_hit(params, k, run.belief.values(), run.prior.values()) + beta0;
      out.value += rho * (beta * g.g1 + f_minus * g.g2);
    }
  }
  return out;
}

/// Exact enumeration of one beam's outcome tree.
struct OracleResult {
  double hit_information = 0.0;  // sum over (n, y) outcomes; the dense MI
  double miss_probability = 0.0;  // all cells free (max range reached)
  double miss_information = 0.0;  // probability-weighted KL of the miss outcome
  double total_probability = 0.0;
};

namespace detail {

inline std::vector<long double> log_softmax(const LogOddsVector& h) {
  long double m = h[0];
  for (double x : h.values()) m = std::max(m, static_cast<long double>(x));
  long double z = 0.0L;
  for (double x : h.values()) z += std::exp(static_cast<long double>(x) - m);
  const long double lse = m + std::log(z);
  std::vector<long double> out(h.size());
  for (std::size_t k = 0; k < h.size(); ++k) out[k] = static_cast<long double>(h[k]) - lse;
  return out;
}

inline double kl_categorical(const LogOddsVector& posterior, const LogOddsVector& prior) {
  const std::vector<long double> lq = log_softmax(posterior);
  const std::vector<long double> lp = log_softmax(prior);
  long double kl = 0.0L;
  for (std::size_t k = 0; k < lq.size(); ++k) kl += std::exp(lq[k]) * (lq[k] - lp[k]);
  return static_cast<double>(kl);
}

}  // namespace detail

/// Ground truth for small rays: every outcome's probability times the summed
/// per-cell KL between the updated and current beliefs. No clamping, no
/// recursion, no shared kernel.
inline OracleResult beam_mi_oracle(std::span<const RayCell> cells, const SensorParams& params) {
  if (cells.empty()) throw EmptyRay("beam traverses no cells");
  if (cells.size() > 8 || params.num_classes() > 3) {
    throw ScaleExceeded("oracle limited to N <= 8 cells and K <= 3 classes");
  }
  std::vector<LogOddsVector> h, h0;
  for (const RayCell& c : cells) {
    detail::check_cell(c.belief, c.prior, params);
    h.push_back(LogOddsVector::from_values({c.belief.begin(), c.belief.end()}));
    h0.push_back(LogOddsVector::from_values({c.prior.begin(), c.prior.end()}));
  }
  const std::size_t n_cells = h.size();
  std::vector<double> kl_free(n_cells);
  std::vector<double> p_free(n_cells);
  for (std::size_t i = 0; i < n_cells; ++i) {
    kl_free[i] = detail::kl_categorical(posterior_update(h[i], params.phi_minus, h0[i]), h[i]);
    p_free[i] = softmax_pmf(h[i])[0];
  }
  OracleResult r;
  for (std::size_t n = 0; n < n_cells; ++n) {
    const CategoricalPmf pmf = softmax_pmf(h[n]);
    for (ClassId y = 1; y <= params.num_classes(); ++y) {
      double prob = pmf[y];
      double info = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        prob *= p_free[i];
        info += kl_free[i];
      }
      const LogOddsVector l = inverse_observation(CellRelation::Occupied, y, h0[n], params);
      info += detail::kl_categorical(posterior_update(h[n], l, h0[n]), h[n]);
      r.hit_information += prob * info;
      r.total_probability += prob;
    }
  }
  double miss = 1.0, miss_info = 0.0;
  for (std::size_t i = 0; i < n_cells; ++i) {
    miss *= p_free[i];
    miss_info += kl_free[i];
  }
  r.miss_probability = miss;
  r.miss_information = miss * miss_info;
  r.total_probability += miss;
  return r;
}

/// Greedy cell-disjoint subset in input order. Returns positions into `traces`.
inline std::vector<std::size_t> select_nonoverlapping(std::span<const RayTrace> traces) {
  std::unordered_set<std::size_t> used;
  std::vector<std::size_t> kept;
  for (std::size_t b = 0; b < traces.size(); ++b) {
    const auto& cells = traces[b].cell_indices;
    bool clash = false;
    for (std::size_t c : cells) {
      if (used.count(c)) {
        clash = true;
        break;
      }
    }
    if (clash) continue;
    used.insert(cells.begin(), cells.end());
    kept.push_back(b);
  }
  return kept;
}

/// Per-element belief/prior views of a dense cast.
inline std::vector<RayCell> ray_cells(const GridMap& map, const RayTrace& trace) {
  std::vector<RayCell> cells;
  cells.reserve(trace.size());
  for (std::size_t i : trace.cell_indices) cells.push_back({map.cell(i), map.prior().values()});
  return cells;
}

}  // namespace ssmi
