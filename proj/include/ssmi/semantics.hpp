#pragma once

// Truncated per-node semantics for the octree: the three most likely classes
// are tracked individually and every other occupied class is lumped into a
// single "others" log-odds entry.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "ssmi/errors.hpp"
#include "ssmi/logodds.hpp"

namespace ssmi {

inline constexpr std::size_t kTrackedClasses = 3;

struct ClassLogOdds {
  ClassId id = 0;
  double logodds = 0.0;
  friend bool operator==(const ClassLogOdds&, const ClassLogOdds&) = default;
};

/// Hit/free evidence applied to one node.
struct NodeObservation {
  bool hit = false;
  ClassId category = 0;  // 1..K when hit

  static NodeObservation free() { return {false, 0}; }
  static NodeObservation hit_class(ClassId y) { return {true, y}; }
};

class TruncatedSemantics {
 public:
  TruncatedSemantics() = default;

  /// Keeps the top three classes of `h` (lowest id first on ties) and lumps
  /// the rest. With K <= 3 nothing is lumped and the representation is exact.
  static TruncatedSemantics from_full(const LogOddsVector& h) {
    const std::size_t k_total = h.num_classes();
    std::vector<ClassLogOdds> all;
    all.reserve(k_total);
    for (std::size_t k = 1; k <= k_total; ++k) {
      all.push_back({static_cast<ClassId>(k), h[k]});
    }
    sort_desc(all);
    TruncatedSemantics s;
    s.num_classes_ = static_cast<std::uint16_t>(k_total);
    const std::size_t keep = std::min(kTrackedClasses, all.size());
    for (std::size_t i = 0; i < keep; ++i) s.data_[i] = all[i];
    s.size_ = static_cast<std::uint8_t>(keep);
    std::vector<double> rest;
    for (std::size_t i = keep; i < all.size(); ++i) rest.push_back(all[i].logodds);
    s.others_ = rest.empty() ? kEmpty : detail::log_sum_exp(rest);
    return s;
  }

  /// Builds from raw parts; `data` is re-sorted.
  static TruncatedSemantics from_parts(std::size_t num_classes, std::span<const ClassLogOdds> data,
                                       double others) {
    if (data.size() > kTrackedClasses) throw InvalidArgument("at most 3 tracked classes");
    std::vector<ClassLogOdds> d(data.begin(), data.end());
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (d[i].id < 1 || d[i].id > num_classes) throw InvalidClass("tracked class out of range");
      for (std::size_t j = 0; j < i; ++j) {
        if (d[j].id == d[i].id) throw InvalidArgument("duplicate tracked class");
      }
    }
    sort_desc(d);
    TruncatedSemantics s;
    s.num_classes_ = static_cast<std::uint16_t>(num_classes);
    std::copy(d.begin(), d.end(), s.data_.begin());
    s.size_ = static_cast<std::uint8_t>(d.size());
    s.others_ = s.others_count() > 0 ? others : kEmpty;
    return s;
  }

  std::size_t num_classes() const { return num_classes_; }
  std::span<const ClassLogOdds> data() const { return {data_.data(), size_}; }
  std::size_t others_count() const { return num_classes_ - size_; }
  bool has_others() const { return others_count() > 0; }
  /// Lumped log-odds; -inf when no class is lumped.
  double others() const { return others_; }

  const ClassLogOdds* find(ClassId y) const {
    for (std::size_t i = 0; i < size_; ++i) {
      if (data_[i].id == y) return &data_[i];
    }
    return nullptr;
  }

  /// Occupancy log-odds ln(P(occupied) / P(free)).
  double occupancy() const {
    std::array<double, kTrackedClasses + 1> v{};
    std::size_t n = 0;
    for (std::size_t i = 0; i < size_; ++i) v[n++] = data_[i].logodds;
    if (has_others()) v[n++] = others_;
    return detail::log_sum_exp({v.data(), n});
  }

  /// Full K+1 belief; lumped classes share the lump uniformly. Exact when
  /// K <= 3.
  LogOddsVector to_full() const {
    std::vector<double> out(num_classes_ + 1, 0.0);
    const std::size_t lumped = others_count();
    const double share = lumped > 0 ? others_ - std::log(static_cast<double>(lumped)) : 0.0;
    for (std::size_t k = 1; k <= num_classes_; ++k) out[k] = share;
    for (std::size_t i = 0; i < size_; ++i) out[data_[i].id] = data_[i].logodds;
    return LogOddsVector::from_values(std::move(out));
  }

  friend bool operator==(const TruncatedSemantics& a, const TruncatedSemantics& b) {
    if (a.num_classes_ != b.num_classes_ || a.size_ != b.size_) return false;
    for (std::size_t i = 0; i < a.size_; ++i) {
      if (!(a.data_[i] == b.data_[i])) return false;
    }
    return !a.has_others() || a.others_ == b.others_;
  }

 private:
  static constexpr double kEmpty = -std::numeric_limits<double>::infinity();

  static void sort_desc(std::vector<ClassLogOdds>& v) {
    std::stable_sort(v.begin(), v.end(), [](const ClassLogOdds& a, const ClassLogOdds& b) {
      if (a.logodds != b.logodds) return a.logodds > b.logodds;
      return a.id < b.id;
    });
  }

  friend TruncatedSemantics update_semantics(const TruncatedSemantics&, NodeObservation,
                                             const LogOddsVector&, const SensorParams&);
  friend TruncatedSemantics fuse_semantics(const TruncatedSemantics&, const TruncatedSemantics&,
                                           const SensorParams&);
  friend void clamp_semantics(TruncatedSemantics&, const SensorParams&);

  std::array<ClassLogOdds, kTrackedClasses> data_{};
  std::uint8_t size_ = 0;
  std::uint16_t num_classes_ = 0;
  double others_ = kEmpty;
};

namespace detail {

inline bool is_tracked(std::span<const ClassLogOdds> d, ClassId k) {
  return std::any_of(d.begin(), d.end(), [k](const ClassLogOdds& c) { return c.id == k; });
}

/// log-mean-exp of per-class increments over the lumped classes.
inline double lump_increment(std::span<const ClassLogOdds> tracked, std::size_t num_classes,
                             std::span<const double> delta) {
  std::vector<double> members;
  for (std::size_t k = 1; k <= num_classes; ++k) {
    if (!is_tracked(tracked, static_cast<ClassId>(k))) members.push_back(delta[k]);
  }
  if (members.empty()) return 0.0;
  return log_sum_exp(members) - std::log(static_cast<double>(members.size()));
}

inline double lse2(double a, double b) {
  const double m = std::max(a, b);
  if (!std::isfinite(m)) return m;
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

}  // namespace detail

inline void clamp_semantics(TruncatedSemantics& s, const SensorParams& params) {
  for (std::size_t i = 0; i < s.size_; ++i) {
    s.data_[i].logodds = clamp_element(s.data_[i].logodds, s.data_[i].id, params);
  }
  if (s.has_others()) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t k = 1; k <= s.num_classes_; ++k) {
      if (detail::is_tracked(s.data(), static_cast<ClassId>(k))) continue;
      lo = std::min(lo, params.clamp_lo[k]);
      hi = std::max(hi, params.clamp_hi[k]);
    }
    s.others_ = std::min(std::max(s.others_, lo), hi);
  }
  std::vector<ClassLogOdds> d(s.data_.begin(), s.data_.begin() + s.size_);
  TruncatedSemantics::sort_desc(d);
  std::copy(d.begin(), d.end(), s.data_.begin());
}

/// Bayesian update of one element node. `prior` is the map prior h0.
///
/// Tracked classes receive l - h0 exactly as the dense update does. The lump
/// receives the log-mean-exp of the increments of its members. A hit on an
/// untracked class carves a fraction alpha of the lump out for that class,
/// updates it, keeps the top three and folds the fourth back into the lump.
inline TruncatedSemantics update_semantics(const TruncatedSemantics& s, NodeObservation z,
                                           const LogOddsVector& prior,
                                           const SensorParams& params) {
  const std::size_t num_classes = s.num_classes_;
  if (prior.num_classes() != num_classes || params.num_classes() != num_classes) {
    throw ClassCountMismatch("semantics, prior and sensor parameters disagree on K");
  }
  if (z.hit && (z.category < 1 || z.category > num_classes)) {
    throw InvalidClass("hit class " + std::to_string(z.category));
  }
  const LogOddsVector l = z.hit ? inverse_observation(CellRelation::Occupied, z.category, prior, params)
                                : params.phi_minus;
  std::vector<double> delta(num_classes + 1, 0.0);
  for (std::size_t k = 1; k <= num_classes; ++k) delta[k] = l[k] - prior[k];

  TruncatedSemantics out = s;
  if (!z.hit || s.find(z.category) != nullptr) {
    for (std::size_t i = 0; i < out.size_; ++i) {
      out.data_[i].logodds = out.data_[i].logodds + delta[out.data_[i].id];
    }
    if (out.has_others()) out.others_ += detail::lump_increment(s.data(), num_classes, delta);
  } else {
    // The lump sees the base hit evidence; the class boost goes to y only.
    std::vector<double> base(num_classes + 1, 0.0);
    for (std::size_t k = 1; k <= num_classes; ++k) base[k] = params.phi_plus[k] - prior[k];
    const double aux = s.others_ + std::log(params.alpha);
    double others = s.others_ + detail::lump_increment(s.data(), num_classes, base) +
                    std::log(1.0 - params.alpha);
    std::vector<ClassLogOdds> candidates(s.data().begin(), s.data().end());
    for (ClassLogOdds& c : candidates) c.logodds = c.logodds + delta[c.id];
    candidates.push_back({z.category, aux + delta[z.category]});
    TruncatedSemantics::sort_desc(candidates);
    while (candidates.size() > kTrackedClasses) {
      others = detail::lse2(candidates.back().logodds, others);
      candidates.pop_back();
    }
    std::copy(candidates.begin(), candidates.end(), out.data_.begin());
    out.size_ = static_cast<std::uint8_t>(candidates.size());
    out.others_ = out.has_others() ? others : TruncatedSemantics::kEmpty;
  }
  clamp_semantics(out, params);
  return out;
}

/// Pairwise child fusion: lumps are sliced across the classes they must stand
/// in for, log-odds are averaged per class, the top three are kept and the
/// remainder is folded back into the lump.
inline TruncatedSemantics fuse_semantics(const TruncatedSemantics& a, const TruncatedSemantics& b,
                                         const SensorParams& params) {
  if (a.num_classes_ != b.num_classes_) throw ClassCountMismatch("fusing semantics of different K");
  std::vector<ClassId> classes;
  for (const auto& c : a.data()) classes.push_back(c.id);
  for (const auto& c : b.data()) {
    if (std::find(classes.begin(), classes.end(), c.id) == classes.end()) classes.push_back(c.id);
  }
  std::sort(classes.begin(), classes.end());
  const double n_union = static_cast<double>(classes.size());
  const double o_a = a.others_ - std::log(1.0 + n_union - static_cast<double>(a.size_));
  const double o_b = b.others_ - std::log(1.0 + n_union - static_cast<double>(b.size_));

  std::vector<ClassLogOdds> fused;
  for (ClassId y : classes) {
    const ClassLogOdds* in_a = a.find(y);
    const ClassLogOdds* in_b = b.find(y);
    const double va = in_a ? in_a->logodds : o_a;
    const double vb = in_b ? in_b->logodds : o_b;
    fused.push_back({y, (va + vb) / 2.0});
  }
  TruncatedSemantics::sort_desc(fused);
  double others = (o_a + o_b) / 2.0;
  while (fused.size() > kTrackedClasses) {
    others = detail::lse2(fused.back().logodds, others);
    fused.pop_back();
  }
  TruncatedSemantics out;
  out.num_classes_ = a.num_classes_;
  std::copy(fused.begin(), fused.end(), out.data_.begin());
  out.size_ = static_cast<std::uint8_t>(fused.size());
  out.others_ = out.has_others() ? others : TruncatedSemantics::kEmpty;
  clamp_semantics(out, params);
  return out;
}

}  // namespace ssmi
