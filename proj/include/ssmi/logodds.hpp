#pragma once

// Multi-class categorical beliefs stored as log-odds against the free class.
//
// A cell belief over classes {0 = free, 1..K} is kept as the vector
// h[k] = ln(p[k] / p[0]), so h[0] is always exactly zero. Bayesian updates
// become vector additions and the PMF is recovered with a softmax.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "ssmi/errors.hpp"

namespace ssmi {

using ClassId = std::uint16_t;

class LogOddsVector {
 public:
  LogOddsVector() = default;

  /// All-zero (uniform) belief over `num_classes` occupied classes plus free.
  explicit LogOddsVector(std::size_t num_classes) : values_(num_classes + 1, 0.0) {}

  LogOddsVector(std::initializer_list<double> values) : values_(values) { validate(); }

  static LogOddsVector from_values(std::vector<double> values) {
    LogOddsVector out;
    out.values_ = std::move(values);
    out.validate();
    return out;
  }

  std::size_t size() const noexcept { return values_.size(); }
  std::size_t num_classes() const noexcept { return values_.empty() ? 0 : values_.size() - 1; }
  double operator[](std::size_t k) const { return values_[k]; }
  std::span<const double> values() const noexcept { return values_; }

  /// Sets a non-pivot element. The pivot (k == 0) is immutable.
  void set(std::size_t k, double value) {
    if (k == 0 || k >= values_.size()) {
      throw IndexOutOfRange("log-odds element " + std::to_string(k));
    }
    if (!std::isfinite(value)) throw InvalidArgument("log-odds must be finite");
    values_[k] = value;
  }

  friend LogOddsVector operator+(const LogOddsVector& a, const LogOddsVector& b) {
    check_same_size(a, b);
    LogOddsVector out = a;
    for (std::size_t k = 1; k < a.size(); ++k) out.values_[k] += b.values_[k];
    return out;
  }

  friend LogOddsVector operator-(const LogOddsVector& a, const LogOddsVector& b) {
    check_same_size(a, b);
    LogOddsVector out = a;
    for (std::size_t k = 1; k < a.size(); ++k) out.values_[k] -= b.values_[k];
    return out;
  }

  friend bool operator==(const LogOddsVector&, const LogOddsVector&) = default;

  static void check_same_size(const LogOddsVector& a, const LogOddsVector& b) {
    if (a.size() != b.size()) {
      throw ClassCountMismatch("log-odds lengths " + std::to_string(a.size()) + " and " +
                               std::to_string(b.size()));
    }
  }

 private:
  void validate() const {
    if (values_.size() < 2) throw InvalidArgument("log-odds vector needs K >= 1");
    if (values_[0] != 0.0) throw InvalidArgument("log-odds pivot element must be 0");
    for (double v : values_) {
      if (!std::isfinite(v)) throw InvalidArgument("log-odds must be finite");
    }
  }

  std::vector<double> values_;
};

class CategoricalPmf {
 public:
  CategoricalPmf() = default;

  explicit CategoricalPmf(std::vector<double> probs) : probs_(std::move(probs)) {
    if (probs_.size() < 2) throw InvalidArgument("pmf needs at least two outcomes");
    double total = 0.0;
    for (double p : probs_) {
      if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("pmf entries must lie in [0,1]");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-12) throw InvalidArgument("pmf must sum to 1");
  }

  CategoricalPmf(std::initializer_list<double> probs) : CategoricalPmf(std::vector<double>(probs)) {}

  std::size_t size() const noexcept { return probs_.size(); }
  double operator[](std::size_t k) const { return probs_[k]; }
  std::span<const double> probs() const noexcept { return probs_; }

 private:
  friend CategoricalPmf softmax_pmf(const LogOddsVector& h);
  struct Unchecked {};
  CategoricalPmf(std::vector<double> probs, Unchecked) : probs_(std::move(probs)) {}

  std::vector<double> probs_;
};

/// Relation between a cell and one beam.
enum class CellRelation { Occupied, Free, Unobserved };

/// Inverse observation model parameters. All vectors have length K+1 and a
/// zero pivot; the clamp vectors bound every non-pivot element of a stored
/// belief.
struct SensorParams {
  LogOddsVector phi_plus;
  LogOddsVector phi_minus;
  LogOddsVector psi_plus;
  std::vector<double> clamp_lo;
  std::vector<double> clamp_hi;
  double alpha = 0.5;

  std::size_t num_classes() const noexcept { return phi_plus.num_classes(); }

  void validate() const {
    const std::size_t n = phi_plus.size();
    if (n < 2 || phi_minus.size() != n || psi_plus.size() != n || clamp_lo.size() != n ||
        clamp_hi.size() != n) {
      throw ClassCountMismatch("sensor parameter vectors must share length K+1");
    }
    if (clamp_lo[0] != 0.0 || clamp_hi[0] != 0.0) {
      throw InvalidArgument("clamp pivot elements must be 0");
    }
    for (std::size_t k = 1; k < n; ++k) {
      if (!(clamp_lo[k] < clamp_hi[k])) throw InvalidArgument("clamp_lo must be below clamp_hi");
    }
    if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("alpha must lie in (0,1)");
  }

  /// Default profile: free evidence -1.39 nats on every class; a hit adds
  /// +0.85 nats to the reported class and 0.85 - psi to the others, where psi
  /// makes the reported class carry `true_positive_rate` of the occupied mass.
  /// Repeated misreports then drift downwards instead of saturating.
  static SensorParams make_default(std::size_t num_classes, double true_positive_rate = 0.65,
                                   double clamp_limit = 6.0) {
    if (num_classes < 1) throw InvalidArgument("num_classes must be >= 1");
    if (!(true_positive_rate > 0.0 && true_positive_rate < 1.0)) {
      throw InvalidArgument("true_positive_rate must lie in (0,1)");
    }
    const std::size_t n = num_classes + 1;
    std::vector<double> plus(n, 0.0), minus(n, -1.39), psi(n, 0.0);
    plus[0] = minus[0] = 0.0;
    const double boost = num_classes >= 2 ? std::log(true_positive_rate *
                                                     static_cast<double>(num_classes - 1) /
                                                     (1.0 - true_positive_rate))
                                          : 0.0;
    for (std::size_t k = 1; k < n; ++k) {
      psi[k] = boost;
      plus[k] = 0.85 - boost;
    }
    SensorParams p{LogOddsVector::from_values(plus), LogOddsVector::from_values(minus),
                   LogOddsVector::from_values(psi), std::vector<double>(n, -clamp_limit),
                   std::vector<double>(n, clamp_limit), 0.5};
    p.clamp_lo[0] = p.clamp_hi[0] = 0.0;
    p.validate();
    return p;
  }
};

namespace detail {

inline double log_sum_exp(std::span<const double> v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

/// f(phi, h) where phi[j] = phi_at(j). Written against an accessor so the hot
/// MI loops can pass `phi - h0 + boost * e_k` without materialising it.
template <typename PhiAt>
double log_ratio_kernel(PhiAt&& phi_at, std::span<const double> h) {
  const std::size_t n = h.size();
  double max_h = -std::numeric_limits<double>::infinity();
  double max_g = max_h;
  std::size_t top = 0;
  for (std::size_t j = 0; j < n; ++j) {
    max_h = std::max(max_h, h[j]);
    const double g = phi_at(j) + h[j];
    if (g > max_g) {
      max_g = g;
      top = j;
    }
  }
  // Shifts are taken relative to the dominant posterior class so that nearly
  // one-hot beliefs keep their relative accuracy.
  const double phi_top = phi_at(top);
  double z_h = 0.0, z_g = 0.0, weighted = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double d = phi_at(j) - phi_top;
    const double e = std::exp(d + h[j] - (max_g - phi_top));
    z_h += std::exp(h[j] - max_h);
    z_g += e;
    if (j != top) weighted += d * e;
  }
  // KL form: sum_k q_k (phi_k - c) with c = lse(phi + h) - lse(h).
  double shift = (max_g + std::log(z_g)) - (max_h + std::log(z_h)) - phi_top;
  if (std::abs(shift) < 0.4 && std::isfinite(phi_top)) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != top) s += std::exp(h[j] - max_h) * std::expm1(phi_at(j) - phi_top);
    }
    shift = std::log1p(s / z_h);
  }
  const double value = weighted / z_g - shift;
  return value > 0.0 ? value : 0.0;
}

}  // namespace detail

inline CategoricalPmf softmax_pmf(const LogOddsVector& h) {
  const auto v = h.values();
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, x);
  std::vector<double> p(v.size());
  double total = 0.0;
  for (std::size_t k = 0; k < v.size(); ++k) {
    p[k] = std::exp(v[k] - m);
    total += p[k];
  }
  for (double& x : p) x /= total;
  return CategoricalPmf(std::move(p), CategoricalPmf::Unchecked{});
}

inline LogOddsVector logodds_from_pmf(const CategoricalPmf& p) {
  if (!(p[0] > 0.0)) throw DegeneratePivot("free-class probability is zero");
  std::vector<double> h(p.size());
  const double log_pivot = std::log(p[0]);
  for (std::size_t k = 1; k < p.size(); ++k) h[k] = std::log(p[k]) - log_pivot;
  return LogOddsVector::from_values(std::move(h));
}

/// Log-odds of the inverse observation model for one cell.
inline LogOddsVector inverse_observation(CellRelation rel, ClassId y, const LogOddsVector& prior,
                                         const SensorParams& params) {
  switch (rel) {
    case CellRelation::Unobserved:
      return prior;
    case CellRelation::Free:
      return params.phi_minus;
    case CellRelation::Occupied: {
      if (y == 0 || y > params.num_classes()) {
        throw InvalidClass("hit class " + std::to_string(y) + " outside 1.." +
                           std::to_string(params.num_classes()));
      }
      LogOddsVector l = params.phi_plus;
      l.set(y, params.phi_plus[y] + params.psi_plus[y]);
      return l;
    }
  }
  return prior;
}

/// h + (l - h0).
inline LogOddsVector posterior_update(const LogOddsVector& h, const LogOddsVector& l,
                                      const LogOddsVector& h0) {
  LogOddsVector::check_same_size(h, l);
  LogOddsVector::check_same_size(h, h0);
  std::vector<double> out(h.size(), 0.0);
  for (std::size_t k = 1; k < h.size(); ++k) out[k] = h[k] + (l[k] - h0[k]);
  return LogOddsVector::from_values(std::move(out));
}

inline double clamp_element(double value, std::size_t k, const SensorParams& params) {
  return std::min(std::max(value, params.clamp_lo[k]), params.clamp_hi[k]);
}

inline LogOddsVector clamp(const LogOddsVector& h, const SensorParams& params) {
  if (h.size() != params.clamp_lo.size()) {
    throw ClassCountMismatch("clamp vectors do not match belief length");
  }
  std::vector<double> out(h.size(), 0.0);
  for (std::size_t k = 1; k < h.size(); ++k) out[k] = clamp_element(h[k], k, params);
  return LogOddsVector::from_values(std::move(out));
}

/// Mode of softmax(h); the lowest index wins ties.
inline ClassId most_likely_class(const LogOddsVector& h) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < h.size(); ++k) {
    if (h[k] > h[best]) best = k;
  }
  return static_cast<ClassId>(best);
}

/// Shannon entropy (nats) of softmax(h), with 0 ln 0 := 0.
inline double entropy(const LogOddsVector& h) {
  const CategoricalPmf p = softmax_pmf(h);
  double e = 0.0;
  for (double x : p.probs()) {
    if (x > 0.0) e -= x * std::log(x);
  }
  return e;
}

inline double entropy(const CategoricalPmf& p) {
  double e = 0.0;
  for (double x : p.probs()) {
    if (x > 0.0) e -= x * std::log(x);
  }
  return e;
}

/// Log-ratio kernel shared by all MI formulas:
///   f(phi, h) = ln(1'exp(h) / 1'exp(phi + h)) + phi' softmax(phi + h),
/// which equals KL(softmax(phi + h) || softmax(h)). Evaluated in the KL form
/// with max subtraction, so it stays finite for |phi| in the hundreds.
inline double f_logratio(const LogOddsVector& phi, const LogOddsVector& h) {
  LogOddsVector::check_same_size(phi, h);
  const auto p = phi.values();
  return detail::log_ratio_kernel([p](std::size_t j) { return p[j]; }, h.values());
}

/// Collapses a K-class belief to the binary occupied/free belief.
inline LogOddsVector collapse_to_binary(const LogOddsVector& h) {
  const auto v = h.values();
  return LogOddsVector{0.0, detail::log_sum_exp(v.subspan(1))};
}

/// Binary sensor model implied by a K-class one. The hit vector uses class 1;
/// with a class-symmetric boost every class gives the same value.
inline SensorParams collapse_to_binary(const SensorParams& params) {
  const LogOddsVector hit = inverse_observation(CellRelation::Occupied, 1,
                                                LogOddsVector(params.num_classes()), params);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t k = 1; k < params.clamp_lo.size(); ++k) {
    lo = std::min(lo, params.clamp_lo[k]);
    hi = std::max(hi, params.clamp_hi[k]);
  }
  SensorParams out{collapse_to_binary(hit), collapse_to_binary(params.phi_minus),
                   LogOddsVector(1),        {0.0, lo},
                   {0.0, hi},               params.alpha};
  return out;
}

}  // namespace ssmi
