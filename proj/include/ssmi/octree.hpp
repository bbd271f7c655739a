#pragma once

// Pruning multi-class octree. Leaves at depth max_depth are "elements", the
// smallest cells; larger leaves stand for aligned blocks of identical
// elements. Inner-node values are refreshed by prune().

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ssmi/errors.hpp"
#include "ssmi/geometry.hpp"
#include "ssmi/gridmap.hpp"
#include "ssmi/logodds.hpp"
#include "ssmi/semantics.hpp"
#include "ssmi/srle.hpp"

namespace ssmi {

/// How prune() summarises an inner node whose children differ.
enum class FusionMode {
  MortonFold,  // fuse(...fuse(c0, c1)..., c7) in child-index order
  Mean,        // arithmetic mean of the 8 full vectors; K <= 3 only, else fold
};

struct SemanticNode {
  double occupancy = 0.0;
  TruncatedSemantics semantics;
  std::unique_ptr<std::array<SemanticNode, 8>> children;

  SemanticNode() = default;
  SemanticNode(double occ, TruncatedSemantics sem) : occupancy(occ), semantics(std::move(sem)) {}
  SemanticNode(const SemanticNode& o)
      : occupancy(o.occupancy),
        semantics(o.semantics),
        children(o.children ? std::make_unique<std::array<SemanticNode, 8>>(*o.children) : nullptr) {}
  SemanticNode& operator=(const SemanticNode& o) {
    if (this != &o) {
      SemanticNode tmp(o);
      *this = std::move(tmp);
    }
    return *this;
  }
  SemanticNode(SemanticNode&&) noexcept = default;
  SemanticNode& operator=(SemanticNode&&) noexcept = default;

  bool is_leaf() const { return !children; }

  void set_value(const TruncatedSemantics& s) {
    semantics = s;
    occupancy = s.occupancy();
  }

  bool same_value(const SemanticNode& o) const {
    return occupancy == o.occupancy && semantics == o.semantics;
  }
};

/// Counters from one leaf-level ray cast.
struct RaycastStats {
  std::size_t elements = 0;  // N
  std::size_t leaves = 0;    // leaf visits, consecutive duplicates removed
  std::size_t runs = 0;      // Q
};

class SemanticOctree {
 public:
  static constexpr int kMaxDepth = 16;

  SemanticOctree(int max_depth, double element_size, Vec3 origin, LogOddsVector prior,
                 SensorParams params, FusionMode mode = FusionMode::MortonFold)
      : max_depth_(max_depth),
        prior_(std::move(prior)),
        params_(std::move(params)),
        mode_(mode) {
    if (max_depth < 1 || max_depth > kMaxDepth) {
      throw BadDims("octree depth " + std::to_string(max_depth) + " outside 1.." +
                    std::to_string(kMaxDepth));
    }
    if (!(element_size > 0.0)) throw BadDims("element size must be positive");
    params_.validate();
    if (params_.num_classes() != prior_.num_classes()) {
      throw ClassCountMismatch("prior and sensor parameters disagree on K");
    }
    const std::int32_t side = std::int32_t{1} << max_depth;
    frame_ = GridFrame{{side, side, side}, element_size, origin};
    prior_sem_ = TruncatedSemantics::from_full(prior_);
    root_.set_value(prior_sem_);
  }

  int max_depth() const { return max_depth_; }
  double element_size() const { return frame_.resolution; }
  std::int32_t side() const { return frame_.dims[0]; }
  const GridFrame& frame() const { return frame_; }
  const LogOddsVector& prior() const { return prior_; }
  const TruncatedSemantics& prior_semantics() const { return prior_sem_; }
  const SensorParams& params() const { return params_; }
  std::size_t num_classes() const { return prior_.num_classes(); }
  FusionMode fusion_mode() const { return mode_; }
  void set_fusion_mode(FusionMode m) { mode_ = m; }
  const SemanticNode& root() const { return root_; }
  SemanticNode& root_mut() { return root_; }

  /// Leaf containing element `key`; `depth` receives its depth (0 = root).
  const SemanticNode& leaf(const GridKey& key, int* depth = nullptr) const {
    check_key(key);
    const SemanticNode* n = &root_;
    int d = 0;
    while (!n->is_leaf()) {
      n = &(*n->children)[child_slot(key, d)];
      ++d;
    }
    if (depth) *depth = d;
    return *n;
  }

  const TruncatedSemantics& query(const GridKey& key) const { return leaf(key).semantics; }

  const TruncatedSemantics& query(const Vec3& p) const {
    if (!frame_.contains(p)) throw IndexOutOfRange("query point outside octree");
    return query(frame_.key_of(p));
  }

  LogOddsVector query_full(const GridKey& key) const { return query(key).to_full(); }

  bool is_observed(const GridKey& key) const { return !(query(key) == prior_sem_); }

  /// Applies one free/hit observation to an element, expanding its leaf only
  /// when the value would actually change.
  void update_element(const GridKey& key, NodeObservation z, const SensorParams& params) {
    check_key(key);
    SemanticNode* n = &root_;
    int d = 0;
    while (!n->is_leaf()) {
      n = &(*n->children)[child_slot(key, d)];
      ++d;
    }
    const TruncatedSemantics updated = update_semantics(n->semantics, z, prior_, params);
    if (updated == n->semantics) return;
    while (d < max_depth_) {
      expand(*n);
      n = &(*n->children)[child_slot(key, d)];
      ++d;
    }
    n->set_value(updated);
  }

  /// Free update before the endpoint, hit update on it, nothing beyond.
  void insert_beam(const BeamMeasurement& beam, const SensorParams& params) {
    beam.validate();
    const RayTrace trace = cast_ray(frame_, beam);
    const std::size_t free_end = trace.hit_index ? *trace.hit_index : trace.size();
    for (std::size_t i = 0; i < free_end; ++i) {
      update_element(frame_.key(trace.cell_indices[i]), NodeObservation::free(), params);
    }
    if (trace.hit_index) {
      update_element(frame_.key(trace.cell_indices[*trace.hit_index]),
                     NodeObservation::hit_class(beam.category), params);
    }
  }

  void insert_scan(std::span<const BeamMeasurement> beams, const SensorParams& params,
                   bool prune_after = true) {
    for (const BeamMeasurement& b : beams) insert_beam(b, params);
    if (prune_after && !beams.empty()) prune();
  }

  /// Overwrites one element.
  void set_element(const GridKey& key, const TruncatedSemantics& s) {
    set_box(key, {key.x + 1, key.y + 1, key.z + 1}, s);
  }

  /// Overwrites every element in [lo, hi). Fully covered aligned blocks are
  /// written as single leaves.
  void set_box(const GridKey& lo, const GridKey& hi, const TruncatedSemantics& s) {
    if (s.num_classes() != num_classes()) throw ClassCountMismatch("value has wrong K");
    GridKey a = lo, b = hi;
    for (int i = 0; i < 3; ++i) {
      a[i] = std::max(a[i], 0);
      b[i] = std::min(b[i], side());
      if (a[i] >= b[i]) return;
    }
    set_box_rec(root_, {0, 0, 0}, side(), a, b, s);
  }

  /// Bottom-up: merges any inner node whose 8 children are equal leaves and
  /// refreshes the summary value of every remaining inner node.
  void prune() { prune_rec(root_); }

  /// Leaf-level cast: consecutive elements with equal values form one run.
  SrleRay raycast_srle(const BeamMeasurement& beam, RaycastStats* stats = nullptr) const {
    const Traversal walk = traverse(frame_, beam.origin, beam.direction, beam.max_range);
    SrleRay ray;
    const SemanticNode* current = nullptr;
    GridKey box_lo{}, box_hi{};
    const TruncatedSemantics* run_value = nullptr;
    std::uint32_t run_width = 0;
    std::size_t leaves = 0;
    auto flush = [&] {
      if (run_width > 0) ray.push(run_value->to_full(), prior_, run_width);
    };
    for (const TraversedCell& c : walk.cells) {
      const GridKey& k = c.key;
      const bool inside = current && k.x >= box_lo.x && k.x < box_hi.x && k.y >= box_lo.y &&
                          k.y < box_hi.y && k.z >= box_lo.z && k.z < box_hi.z;
      if (!inside) {
        int depth = 0;
        current = &leaf(k, &depth);
        const std::int32_t size = side() >> depth;
        for (int a = 0; a < 3; ++a) {
          box_lo[a] = k[a] / size * size;
          box_hi[a] = box_lo[a] + size;
        }
        ++leaves;
      }
      if (run_value && current->semantics == *run_value) {
        ++run_width;
      } else {
        flush();
        run_value = &current->semantics;
        run_width = 1;
      }
    }
    flush();
    if (stats) *stats = {walk.cells.size(), leaves, ray.run_count()};
    return ray;
  }

  /// Visits every leaf with its minimum element key and edge length in
  /// elements, in preorder.
  void for_each_leaf(
      const std::function<void(const GridKey&, std::int32_t, const SemanticNode&)>& fn) const {
    leaf_rec(root_, {0, 0, 0}, side(), fn);
  }

  std::size_t leaf_count() const {
    std::size_t n = 0;
    for_each_leaf([&](const GridKey&, std::int32_t, const SemanticNode&) { ++n; });
    return n;
  }

  std::size_t node_count() const { return count_rec(root_); }

  /// True when no inner node has 8 equal leaf children.
  bool is_canonical() const { return canonical_rec(root_); }

 private:
  void check_key(const GridKey& key) const {
    if (!frame_.contains(key)) {
      throw IndexOutOfRange("element (" + std::to_string(key.x) + ", " + std::to_string(key.y) +
                            ", " + std::to_string(key.z) + ") outside octree");
    }
  }

  int child_slot(const GridKey& key, int depth) const {
    const int bit = max_depth_ - 1 - depth;
    return ((key.x >> bit) & 1) | (((key.y >> bit) & 1) << 1) | (((key.z >> bit) & 1) << 2);
  }

  static void expand(SemanticNode& n) {
    n.children = std::make_unique<std::array<SemanticNode, 8>>();
    for (SemanticNode& c : *n.children) {
      c.occupancy = n.occupancy;
      c.semantics = n.semantics;
    }
  }

  void set_box_rec(SemanticNode& n, GridKey base, std::int32_t size, const GridKey& lo,
                   const GridKey& hi, const TruncatedSemantics& s) {
    bool covers = true;
    for (int a = 0; a < 3; ++a) {
      if (base[a] + size <= lo[a] || base[a] >= hi[a]) return;
      if (base[a] < lo[a] || base[a] + size > hi[a]) covers = false;
    }
    if (covers) {
      n.children.reset();
      n.set_value(s);
      return;
    }
    if (n.is_leaf()) expand(n);
    const std::int32_t half = size / 2;
    for (int i = 0; i < 8; ++i) {
      const GridKey cb{base.x + (i & 1) * half, base.y + ((i >> 1) & 1) * half,
                       base.z + ((i >> 2) & 1) * half};
      set_box_rec((*n.children)[i], cb, half, lo, hi, s);
    }
  }

  void prune_rec(SemanticNode& n) {
    if (n.is_leaf()) return;
    auto& ch = *n.children;
    bool all_leaves = true;
    for (SemanticNode& c : ch) {
      prune_rec(c);
      all_leaves = all_leaves && c.is_leaf();
    }
    if (all_leaves) {
      bool equal = true;
      for (int i = 1; i < 8 && equal; ++i) equal = ch[i].same_value(ch[0]);
      if (equal) {
        n.occupancy = ch[0].occupancy;
        n.semantics = ch[0].semantics;
        n.children.reset();
        return;
      }
    }
    n.set_value(summarise(ch));
  }

  TruncatedSemantics summarise(const std::array<SemanticNode, 8>& ch) const {
    if (mode_ == FusionMode::Mean && num_classes() <= kTrackedClasses) {
      std::vector<double> mean(num_classes() + 1, 0.0);
      for (const SemanticNode& c : ch) {
        const LogOddsVector full = c.semantics.to_full();
        for (std::size_t k = 1; k < mean.size(); ++k) mean[k] += full[k];
      }
      for (std::size_t k = 1; k < mean.size(); ++k) mean[k] /= 8.0;
      TruncatedSemantics s = TruncatedSemantics::from_full(LogOddsVector::from_values(mean));
      clamp_semantics(s, params_);
      return s;
    }
    TruncatedSemantics acc = ch[0].semantics;
    for (int i = 1; i < 8; ++i) acc = fuse_semantics(acc, ch[i].semantics, params_);
    return acc;
  }

  static void leaf_rec(
      const SemanticNode& n, GridKey base, std::int32_t size,
      const std::function<void(const GridKey&, std::int32_t, const SemanticNode&)>& fn) {
    if (n.is_leaf()) {
      fn(base, size, n);
      return;
    }
    const std::int32_t half = size / 2;
    for (int i = 0; i < 8; ++i) {
      const GridKey cb{base.x + (i & 1) * half, base.y + ((i >> 1) & 1) * half,
                       base.z + ((i >> 2) & 1) * half};
      leaf_rec((*n.children)[i], cb, half, fn);
    }
  }

  static std::size_t count_rec(const SemanticNode& n) {
    std::size_t c = 1;
    if (!n.is_leaf()) {
      for (const SemanticNode& ch : *n.children) c += count_rec(ch);
    }
    return c;
  }

  static bool canonical_rec(const SemanticNode& n) {
    if (n.is_leaf()) return true;
    bool all_leaves = true, equal = true;
    for (const SemanticNode& c : *n.children) {
      if (!canonical_rec(c)) return false;
      all_leaves = all_leaves && c.is_leaf();
      equal = equal && c.same_value((*n.children)[0]);
    }
    return !(all_leaves && equal);
  }

  int max_depth_;
  GridFrame frame_;
  LogOddsVector prior_;
  TruncatedSemantics prior_sem_;
  SensorParams params_;
  FusionMode mode_;
  SemanticNode root_;
};

/// Pairwise fusion of two leaf values.
inline TruncatedSemantics fuse_children(const SemanticNode& a, const SemanticNode& b,
                                        const SensorParams& params) {
  return fuse_semantics(a.semantics, b.semantics, params);
}

/// One element update on a free-standing node.
inline SemanticNode update_node(const SemanticNode& node, NodeObservation z,
                                const LogOddsVector& prior, const SensorParams& params) {
  SemanticNode out;
  out.set_value(update_semantics(node.semantics, z, prior, params));
  return out;
}

}  // namespace ssmi
