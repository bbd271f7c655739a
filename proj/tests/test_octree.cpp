#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "ssmi/convert.hpp"
#include "ssmi/io.hpp"
#include "ssmi/octree.hpp"
#include "support.hpp"

using namespace ssmi;

namespace {

BeamMeasurement beam(Vec3 o, Vec3 d, double range, double max_range, ClassId y = 1) {
  return {o, d.normalized(), range, y, max_range};
}

Vec3 random_direction(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return Vec3{n(rng), n(rng), n(rng)}.normalized();
}

std::vector<BeamMeasurement> random_beams(std::mt19937_64& rng, double side, std::size_t k, int count) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<BeamMeasurement> out;
  for (int i = 0; i < count; ++i) {
    const double r_max = 2 + u(rng) * side;
    const double r = u(rng) < 0.3 ? r_max : u(rng) * r_max;
    out.push_back(beam({u(rng) * side, u(rng) * side, u(rng) * side}, random_direction(rng), r, r_max,
                       static_cast<ClassId>(1 + i % k)));
  }
  return out;
}

// Minimal leaf count of a dense cube: a block is one leaf when all its cells
// are equal, otherwise the sum of its octants.
std::size_t merged_leaves(const GridMap& g, GridKey base, std::int32_t size) {
  bool uniform = true;
  const auto first = g.cell(base);
  for (std::int32_t z = base.z; z < base.z + size && uniform; ++z) {
    for (std::int32_t y = base.y; y < base.y + size && uniform; ++y) {
      for (std::int32_t x = base.x; x < base.x + size && uniform; ++x) {
        const auto c = g.cell(GridKey{x, y, z});
        uniform = std::equal(c.begin(), c.end(), first.begin());
      }
    }
  }
  if (uniform) return 1;
  const std::int32_t h = size / 2;
  std::size_t n = 0;
  for (int i = 0; i < 8; ++i) {
    n += merged_leaves(g, {base.x + (i & 1) * h, base.y + ((i >> 1) & 1) * h, base.z + ((i >> 2) & 1) * h}, h);
  }
  return n;
}

}  // namespace

TEST(UpdateNode, TrackedPathMatchesDenseUpdate) {
  std::mt19937_64 rng(31);
  for (std::size_t k = 1; k <= 3; ++k) {
    const SensorParams p = oracle::random_params(rng, k);
    const LogOddsVector prior = oracle::random_h(rng, k, -1, 1);
    TruncatedSemantics s = TruncatedSemantics::from_full(prior);
    LogOddsVector dense = prior;
    for (int t = 0; t < 400; ++t) {
      const bool hit = rng() % 2;
      const ClassId y = static_cast<ClassId>(1 + rng() % k);
      s = update_semantics(s, hit ? NodeObservation::hit_class(y) : NodeObservation::free(), prior, p);
      const LogOddsVector l = hit ? inverse_observation(CellRelation::Occupied, y, prior, p) : p.phi_minus;
      dense = clamp(posterior_update(dense, l, prior), p);
      ASSERT_EQ(s.to_full(), dense) << "K=" << k << " step " << t;
    }
  }
}

TEST(UpdateNode, UntrackedHitCarvesAlphaFromLump) {
  SensorParams p = SensorParams::make_default(5);
  p.phi_plus = LogOddsVector(5);
  p.psi_plus = LogOddsVector{0, 0, 0, 0, 3.0, 0};
  const LogOddsVector prior(5);
  const TruncatedSemantics s = TruncatedSemantics::from_full(LogOddsVector{0, 1.0, 0.9, 0.8, 0.1, 0.0});
  ASSERT_EQ(s.find(4), nullptr);
  const double lump = s.others();
  EXPECT_NEAR(lump, std::log(std::exp(0.1) + 1.0), 1e-15);
  const TruncatedSemantics u = update_semantics(s, NodeObservation::hit_class(4), prior, p);
  ASSERT_NE(u.find(4), nullptr);
  EXPECT_NEAR(u.find(4)->logodds, lump - std::log(2.0) + 3.0, 1e-12);
  EXPECT_EQ(u.data()[0].id, 4);
  EXPECT_EQ(u.data().size(), 3u);
  // Class 3 (0.8) is evicted and folded back with the remaining half lump.
  EXPECT_EQ(u.find(3), nullptr);
  EXPECT_NEAR(u.others(), std::log(std::exp(0.8) + std::exp(lump + std::log(0.5))), 1e-12);
  for (std::size_t i = 1; i < u.data().size(); ++i) EXPECT_GE(u.data()[i - 1].logodds, u.data()[i].logodds);
  EXPECT_THROW(update_semantics(s, NodeObservation::hit_class(0), prior, p), InvalidClass);
  EXPECT_THROW(update_semantics(s, NodeObservation::hit_class(6), prior, p), InvalidClass);
}

TEST(UpdateNodeProperty, LumpTracksItsMembers) {
  std::mt19937_64 rng(32);
  for (std::size_t k = 4; k <= 5; ++k) {
    SensorParams p = SensorParams::make_default(k, 0.65, 100.0);
    const LogOddsVector prior(k);
    for (int trial = 0; trial < 50; ++trial) {
      LogOddsVector full = oracle::random_h(rng, k, -2, 2);
      TruncatedSemantics s = TruncatedSemantics::from_full(full);
      for (int t = 0; t < 30; ++t) {
        const bool hit = rng() % 2;
        const ClassId y = s.data()[rng() % s.data().size()].id;
        s = update_semantics(s, hit ? NodeObservation::hit_class(y) : NodeObservation::free(), prior, p);
        const LogOddsVector l = hit ? inverse_observation(CellRelation::Occupied, y, prior, p) : p.phi_minus;
        full = posterior_update(full, l, prior);
        std::vector<double> members;
        for (std::size_t j = 1; j <= k; ++j) {
          const ClassLogOdds* c = s.find(static_cast<ClassId>(j));
          if (c) {
            ASSERT_NEAR(c->logodds, full[j], 1e-12);
          } else {
            members.push_back(full[j]);
          }
        }
        long double z = 0;
        for (double m : members) z += std::exp(static_cast<long double>(m));
        ASSERT_NEAR(s.others(), static_cast<double>(std::log(z)), 1e-12);
      }
    }
  }
}

TEST(FuseChildren, SelfFusionIsFixedPoint) {
  std::mt19937_64 rng(33);
  const SensorParams p = SensorParams::make_default(5);
  for (int t = 0; t < 200; ++t) {
    const TruncatedSemantics a = TruncatedSemantics::from_full(clamp(oracle::random_h(rng, 5, -5, 5), p));
    EXPECT_EQ(fuse_semantics(a, a, p), a);
  }
}

TEST(FuseChildren, IsSymmetric) {
  std::mt19937_64 rng(34);
  for (std::size_t k : {2, 3, 5, 7}) {
    const SensorParams p = SensorParams::make_default(k);
    for (int t = 0; t < 200; ++t) {
      const auto a = TruncatedSemantics::from_full(clamp(oracle::random_h(rng, k, -5, 5), p));
      const auto b = TruncatedSemantics::from_full(clamp(oracle::random_h(rng, k, -5, 5), p));
      const TruncatedSemantics ab = fuse_semantics(a, b, p), ba = fuse_semantics(b, a, p);
      ASSERT_EQ(ab, ba);
      ASSERT_LE(ab.data().size(), 3u);
      for (std::size_t i = 1; i < ab.data().size(); ++i) ASSERT_GE(ab.data()[i - 1].logodds, ab.data()[i].logodds);
    }
  }
}

TEST(FuseChildren, DisjointSingletons) {
  const SensorParams p = SensorParams::make_default(2);
  const std::vector<ClassLogOdds> da{{1, 2.0}}, db{{2, 1.0}};
  const auto a = TruncatedSemantics::from_parts(2, da, -1.0);
  const auto b = TruncatedSemantics::from_parts(2, db, -3.0);
  const TruncatedSemantics f = fuse_semantics(a, b, p);
  ASSERT_EQ(f.data().size(), 2u);
  EXPECT_FALSE(f.has_others());
  EXPECT_NEAR(f.find(1)->logodds, (2.0 + (-3.0 - std::log(2.0))) / 2, 1e-15);
  EXPECT_NEAR(f.find(2)->logodds, ((-1.0 - std::log(2.0)) + 1.0) / 2, 1e-15);
}

TEST(SemanticOctree, FreshTreeIsOneLeaf) {
  const SemanticOctree t(4, 1.0, {}, LogOddsVector(3), SensorParams::make_default(3));
  EXPECT_EQ(t.leaf_count(), 1u);
  EXPECT_EQ(t.side(), 16);
  EXPECT_THROW(SemanticOctree(0, 1.0, {}, LogOddsVector(3), SensorParams::make_default(3)), BadDims);
  EXPECT_THROW(SemanticOctree(3, 1.0, {}, LogOddsVector(2), SensorParams::make_default(3)), ClassCountMismatch);
}

TEST(InsertScan, OneBeamLeavesOffRayOctantsWhole) {
  const SensorParams p = SensorParams::make_default(3);
  SemanticOctree t(4, 1.0, {}, LogOddsVector(3), p);
  const std::vector<BeamMeasurement> beams{beam({0.5, 0.5, 0.5}, {1, 0, 0}, 15.5, 15.5)};
  t.insert_scan(beams, p);
  for (int x = 0; x < 16; ++x) EXPECT_EQ(t.query_full({x, 0, 0}), clamp(p.phi_minus, p));
  ASSERT_FALSE(t.root().is_leaf());
  for (int i = 2; i < 8; ++i) {
    EXPECT_TRUE((*t.root().children)[i].is_leaf());
    EXPECT_EQ((*t.root().children)[i].semantics, t.prior_semantics());
  }
  EXPECT_TRUE(t.is_canonical());
  const std::size_t before = t.node_count();
  t.insert_scan({}, p);
  EXPECT_EQ(t.node_count(), before);
}

TEST(InsertScan, SaturatedBeamPrunesLikeMergedGrid) {
  const SensorParams p = SensorParams::make_default(3);
  SemanticOctree t(3, 1.0, {}, LogOddsVector(3), p);
  GridMap g(GridFrame{{8, 8, 8}, 1.0, {}}, LogOddsVector(3));
  std::vector<BeamMeasurement> beams;
  for (int y = 0; y < 8; ++y) beams.push_back(beam({0.5, y + 0.5, 0.5}, {1, 0, 0}, 8, 8));
  for (int rep = 0; rep < 10; ++rep) {
    t.insert_scan(beams, p);
    for (const auto& b : beams) integrate(g, b, p);
  }
  EXPECT_EQ(t.leaf_count(), merged_leaves(g, {0, 0, 0}, 8));
  EXPECT_EQ(t.leaf_count(), 148u);
  for (std::size_t i = 0; i < g.cell_count(); ++i) ASSERT_EQ(t.query_full(g.frame().key(i)), g.value(i));
}

TEST(InsertScanProperty, LeafCountMatchesMergeOracle) {
  std::mt19937_64 rng(35);
  const SensorParams p = SensorParams::make_default(2);
  for (int trial = 0; trial < 20; ++trial) {
    SemanticOctree t(3, 1.0, {}, LogOddsVector(2), p);
    GridMap g(GridFrame{{8, 8, 8}, 1.0, {}}, LogOddsVector(2));
    const auto beams = random_beams(rng, 8, 2, 10);
    for (int rep = 0; rep < 3; ++rep) {
      t.insert_scan(beams, p);
      for (const auto& b : beams) integrate(g, b, p);
    }
    ASSERT_EQ(t.leaf_count(), merged_leaves(g, {0, 0, 0}, 8));
    ASSERT_TRUE(t.is_canonical());
  }
}

TEST(SemanticOctreeProperty, MatchesDenseGridBitForBit) {
  std::mt19937_64 rng(36);
  for (std::size_t k = 1; k <= 3; ++k) {
    const SensorParams p = oracle::random_params(rng, k);
    const LogOddsVector prior = oracle::random_h(rng, k, -0.5, 0.5);
    SemanticOctree t(4, 0.5, {1.0, -2.0, 0.0}, prior, p);
    GridMap g(t.frame(), prior);
    std::vector<BeamMeasurement> beams = random_beams(rng, 8, k, 60);
    for (auto& b : beams) b.origin = b.origin + Vec3{1.0, -2.0, 0.0};
    for (std::size_t i = 0; i < beams.size(); i += 6) {
      const std::span<const BeamMeasurement> scan(beams.data() + i, 6);
      t.insert_scan(scan, p);
      for (const auto& b : scan) integrate(g, b, p);
    }
    for (std::size_t i = 0; i < g.cell_count(); ++i) {
      ASSERT_EQ(t.query_full(g.frame().key(i)), g.value(i)) << "K=" << k;
    }
  }
}

TEST(Prune, Examples) {
  const SensorParams p = SensorParams::make_default(3);
  SemanticOctree t(2, 1.0, {}, LogOddsVector(3), p);
  const auto a = TruncatedSemantics::from_full(LogOddsVector{0, 1, 0, 0});
  const auto b = TruncatedSemantics::from_full(LogOddsVector{0, 0, 1, 0});
  t.set_box({0, 0, 0}, {4, 4, 4}, a);
  t.set_element({0, 0, 0}, b);
  t.set_element({0, 0, 0}, a);
  EXPECT_FALSE(t.is_canonical());
  t.prune();
  EXPECT_EQ(t.leaf_count(), 1u);

  t.set_element({1, 1, 1}, b);
  t.prune();
  EXPECT_EQ(t.leaf_count(), 15u);
  EXPECT_TRUE(t.is_canonical());
  std::ostringstream once, twice;
  write_octree(once, t);
  t.prune();
  write_octree(twice, t);
  EXPECT_EQ(once.str(), twice.str());
}

TEST(PruneProperty, QueriesAreTransparent) {
  std::mt19937_64 rng(37);
  std::uniform_int_distribution<int> e(0, 15);
  for (std::size_t k : {2, 3, 5}) {
    const SensorParams p = SensorParams::make_default(k);
    SemanticOctree t(4, 1.0, {}, LogOddsVector(k), p);
    for (int round = 0; round < 5; ++round) {
      t.insert_scan(random_beams(rng, 16, k, 30), p, false);
      std::vector<std::pair<GridKey, TruncatedSemantics>> before;
      for (int i = 0; i < 2000; ++i) {
        const GridKey key{e(rng), e(rng), e(rng)};
        before.emplace_back(key, t.query(key));
      }
      t.prune();
      for (const auto& [key, s] : before) ASSERT_EQ(t.query(key), s);
      ASSERT_TRUE(t.is_canonical());
    }
  }
}

TEST(Fusion, ParentSummaries) {
  const SensorParams p = SensorParams::make_default(2);
  SemanticOctree t(1, 1.0, {}, LogOddsVector(2), p);
  for (int i = 0; i < 8; ++i) {
    t.set_element({i & 1, (i >> 1) & 1, (i >> 2) & 1},
                  TruncatedSemantics::from_full(LogOddsVector{0, 0.5 * i, -0.25 * i}));
  }
  t.prune();
  // Left fold weights the last child by one half.
  double fold1 = 0.0, fold2 = 0.0;
  for (int i = 0; i < 8; ++i) {
    fold1 = i == 0 ? 0.0 : (fold1 + 0.5 * i) / 2;
    fold2 = i == 0 ? 0.0 : (fold2 - 0.25 * i) / 2;
  }
  EXPECT_NEAR(t.root().semantics.to_full()[1], fold1, 1e-15);
  EXPECT_NEAR(t.root().semantics.to_full()[2], fold2, 1e-15);

  t.set_fusion_mode(FusionMode::Mean);
  t.prune();
  EXPECT_NEAR(t.root().semantics.to_full()[1], 0.5 * 3.5, 1e-15);
  EXPECT_NEAR(t.root().semantics.to_full()[2], -0.25 * 3.5, 1e-15);
}

TEST(RaycastSrle, FreshTreeIsOneRun) {
  const LogOddsVector prior{0, 0.2, -0.1};
  const SemanticOctree t(4, 1.0, {}, prior, SensorParams::make_default(2));
  RaycastStats st;
  const SrleRay r = t.raycast_srle(beam({0.5, 3.5, 3.5}, {1, 0, 0}, 15.5, 15.5), &st);
  ASSERT_EQ(r.run_count(), 1u);
  EXPECT_EQ(r.runs[0].width, 16u);
  EXPECT_EQ(r.runs[0].belief, prior);
  EXPECT_EQ(st.elements, 16u);
  EXPECT_EQ(st.leaves, 1u);
}

TEST(RaycastSrle, FreeWallUnknownRuns) {
  const SensorParams p = SensorParams::make_default(3);
  SemanticOctree t(4, 1.0, {}, LogOddsVector(3), p);
  GridMap g(t.frame(), LogOddsVector(3));
  const std::vector<BeamMeasurement> scan{beam({0.5, 0.5, 0.5}, {1, 0, 0}, 6.0, 12.0, 2)};
  t.insert_scan(scan, p);
  integrate(g, scan[0], p);
  const BeamMeasurement probe = beam({0.5, 0.5, 0.5}, {1, 0, 0}, 15.5, 15.5);
  const SrleRay r = t.raycast_srle(probe);
  ASSERT_EQ(r.run_count(), 3u);
  EXPECT_EQ(r.runs[0].width, 6u);
  EXPECT_EQ(r.runs[1].width, 1u);
  EXPECT_EQ(r.runs[2].width, 9u);
  const RayTrace trace = cast_ray(g, probe);
  EXPECT_EQ(encode(ray_cells(g, trace)), r);
}

TEST(RaycastSrleProperty, ExpandsToDenseSequence) {
  std::mt19937_64 rng(38);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const SensorParams p = SensorParams::make_default(3);
  SemanticOctree t(5, 0.5, {}, LogOddsVector(3), p);
  GridMap g(t.frame(), LogOddsVector(3));
  for (int i = 0; i < 10; ++i) {
    const auto scan = random_beams(rng, 16, 3, 20);
    t.insert_scan(scan, p);
    for (const auto& b : scan) integrate(g, b, p);
  }
  for (int i = 0; i < 300; ++i) {
    const double r_max = 1 + 20 * u(rng);
    const BeamMeasurement b = beam({u(rng) * 16, u(rng) * 16, u(rng) * 16}, random_direction(rng), r_max, r_max);
    RaycastStats st;
    const SrleRay r = t.raycast_srle(b, &st);
    const RayTrace trace = cast_ray(g, b);
    ASSERT_EQ(r.element_count(), trace.size());
    ASSERT_EQ(st.elements, trace.size());
    ASSERT_LE(st.runs, st.leaves);
    const auto cells = expand(r);
    for (std::size_t n = 0; n < cells.size(); ++n) {
      const auto d = g.cell(trace.cell_indices[n]);
      ASSERT_TRUE(std::equal(d.begin(), d.end(), cells[n].belief.begin()));
    }
  }
}

TEST(GridIo, BinaryAndJsonRoundTrip) {
  std::mt19937_64 rng(39);
  GridMap g(GridFrame{{5, 4, 3}, 0.25, {1, 2, 3}}, LogOddsVector{0, 0.5, -0.5});
  for (std::size_t i = 0; i < g.cell_count(); i += 2) g.set(i, oracle::random_h(rng, 2, -6, 6));
  std::stringstream ss;
  write_grid(ss, g);
  const GridMap back = read_grid(ss);
  EXPECT_EQ(back.frame(), g.frame());
  for (std::size_t i = 0; i < g.cell_count(); ++i) {
    for (std::size_t k = 0; k <= 2; ++k) EXPECT_EQ(back.cell(i)[k], static_cast<double>(static_cast<float>(g.cell(i)[k])));
  }
  std::stringstream again;
  write_grid(again, back);
  ss.clear();
  ss.seekg(0);
  EXPECT_EQ(again.str(), ss.str());

  const GridMap js = grid_from_json(nlohmann::json::parse(grid_to_json(g).dump()));
  for (std::size_t i = 0; i < g.cell_count(); ++i) EXPECT_EQ(js.value(i), g.value(i));

  std::stringstream bad("NOTAGRID");
  EXPECT_THROW(read_grid(bad), FormatError);
  std::stringstream truncated(ss.str().substr(0, 40));
  EXPECT_THROW(read_grid(truncated), FormatError);
}

TEST(OctreeIo, RoundTripIsByteStable) {
  std::mt19937_64 rng(40);
  const SensorParams p = SensorParams::make_default(5);
  SemanticOctree t(4, 0.5, {-1, 0, 2}, LogOddsVector(5), p);
  for (int i = 0; i < 4; ++i) {
    auto scan = random_beams(rng, 8, 5, 20);
    for (auto& b : scan) b.origin = b.origin + Vec3{-1, 0, 2};
    t.insert_scan(scan, p);
  }
  std::stringstream ss;
  write_octree(ss, t);
  const SemanticOctree back = read_octree(ss, p);
  std::stringstream again;
  write_octree(again, back);
  EXPECT_EQ(again.str(), ss.str());
  EXPECT_EQ(back.leaf_count(), t.leaf_count());
  EXPECT_EQ(back.frame(), t.frame());
  std::stringstream bad("SSMIOCT1");
  EXPECT_THROW(read_octree(bad), FormatError);
}

TEST(Convert, GridOctreeRoundTrip) {
  const SensorParams p = SensorParams::make_default(3);
  GridMap g(GridFrame{{8, 8, 8}, 1.0, {}}, LogOddsVector(3));
  std::mt19937_64 rng(41);
  for (const auto& b : random_beams(rng, 8, 3, 40)) integrate(g, b, p);
  const SemanticOctree t = grid_to_octree(g, p);
  EXPECT_TRUE(t.is_canonical());
  const GridMap back = octree_to_grid(t);
  for (std::size_t i = 0; i < g.cell_count(); ++i) ASSERT_EQ(back.value(i), g.value(i));
}
