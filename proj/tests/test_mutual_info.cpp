#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>

#include "ssmi/mutual_info.hpp"
#include "ssmi/octree.hpp"
#include "ssmi/sim/mi_check.hpp"
#include "ssmi/sim/scenes.hpp"
#include "ssmi/trajectory.hpp"
#include "support.hpp"

using namespace ssmi;

namespace {

struct Ray {
  std::vector<LogOddsVector> h, h0;

  std::vector<RayCell> cells() const {
    std::vector<RayCell> out;
    for (std::size_t i = 0; i < h.size(); ++i) out.push_back({h[i].values(), h0[i].values()});
    return out;
  }
  std::vector<oracle::Cell> oracle_cells() const {
    std::vector<oracle::Cell> out;
    for (std::size_t i = 0; i < h.size(); ++i) out.push_back({h[i], h0[i]});
    return out;
  }
};

Ray random_ray(std::mt19937_64& rng, std::size_t n, std::size_t k, double lim) {
  Ray r;
  const LogOddsVector h0 = oracle::random_h(rng, k, -1, 1);
  for (std::size_t i = 0; i < n; ++i) {
    r.h.push_back(oracle::random_h(rng, k, -lim, lim));
    r.h0.push_back(h0);
  }
  return r;
}

BeamMeasurement beam(Vec3 o, Vec3 d, double max_range) { return {o, d.normalized(), max_range, 0, max_range}; }

}  // namespace

TEST(BeamMiDense, SingleBinaryCellByHand) {
  SensorParams p = SensorParams::make_default(1);
  p.phi_plus = LogOddsVector{0, 0.85};
  p.phi_minus = LogOddsVector{0, -0.85};
  p.psi_plus = LogOddsVector(1);
  const LogOddsVector h(1);
  const std::vector<RayCell> cells{{h.values(), h.values()}};
  const double q = 1 / (1 + std::exp(-0.85));
  const double kl = q * std::log(2 * q) + (1 - q) * std::log(2 * (1 - q));
  EXPECT_NEAR(beam_mi_dense(cells, p).value, 0.5 * kl, 1e-15);
}

TEST(BeamMiDense, KnownFreeMapCarriesAlmostNothing) {
  const SensorParams p = SensorParams::make_default(3);
  const LogOddsVector h = clamp(LogOddsVector{0, -100, -100, -100}, p), h0(3);
  const std::vector<RayCell> cells(20, RayCell{h.values(), h0.values()});
  const double mi = beam_mi_dense(cells, p).value;
  EXPECT_GE(mi, 0.0);
  EXPECT_LT(mi / cells.size(), 1e-3);
  EXPECT_LT(beam_mi_dense(std::span(cells).first(1), p).value, 1e-3);
}

TEST(BeamMiDense, ZeroInformationModelGivesZero) {
  std::mt19937_64 rng(50);
  SensorParams p = SensorParams::make_default(3);
  p.phi_plus = LogOddsVector(3);
  p.phi_minus = LogOddsVector(3);
  p.psi_plus = LogOddsVector(3);
  const Ray r = random_ray(rng, 6, 3, 4);
  Ray zero = r;
  for (auto& h0 : zero.h0) h0 = LogOddsVector(3);
  EXPECT_EQ(beam_mi_dense(zero.cells(), p).value, 0.0);
  EXPECT_EQ(beam_mi_oracle(zero.cells(), p).hit_information, 0.0);
}

TEST(BeamMiDense, Errors) {
  const SensorParams p = SensorParams::make_default(2);
  EXPECT_THROW(beam_mi_dense({}, p), EmptyRay);
  EXPECT_THROW(beam_mi_srle(SrleRay{}, p), EmptyRay);
  const LogOddsVector h(3);
  const std::vector<RayCell> wrong{{h.values(), h.values()}};
  EXPECT_THROW(beam_mi_dense(wrong, p), ClassCountMismatch);
  const LogOddsVector ok(2);
  const std::vector<RayCell> nine(9, RayCell{ok.values(), ok.values()});
  EXPECT_THROW(beam_mi_oracle(nine, p), ScaleExceeded);
}

TEST(BeamMiDenseProperty, MatchesOutcomeTreeOracle) {
  std::mt19937_64 rng(51);
  double worst = 0;
  for (int t = 0; t < 1500; ++t) {
    const std::size_t k = 1 + t % 3, n = 1 + (t / 3) % 8;
    const SensorParams p = oracle::random_params(rng, k, 8.0);
    const Ray r = random_ray(rng, n, k, 8.0);
    const double dense = beam_mi_dense(r.cells(), p).value;
    const oracle::BeamOutcomes ref = oracle::beam_outcomes(r.oracle_cells(), p);
    ASSERT_NEAR(static_cast<double>(ref.total_probability), 1.0, 1e-12);
    const double expected = static_cast<double>(ref.hit_information);
    worst = std::max(worst, oracle::rel(dense, expected));
    ASSERT_LE(oracle::rel(dense, expected), 1e-10) << "trial " << t;
    const OracleResult lib = beam_mi_oracle(r.cells(), p);
    ASSERT_LE(oracle::rel(lib.hit_information, expected), 1e-10);
    ASSERT_NEAR(lib.miss_probability, static_cast<double>(ref.miss_probability), 1e-15);
    ASSERT_NEAR(lib.total_probability, 1.0, 1e-12);
    ASSERT_GE(dense, -1e-12);
  }
  RecordProperty("worst_relative_error", std::to_string(worst));
}

TEST(BeamMiDenseProperty, RecursionMatchesDirectSum) {
  std::mt19937_64 rng(52);
  for (int t = 0; t < 300; ++t) {
    const SensorParams p = oracle::random_params(rng, 3);
    const Ray r = random_ray(rng, 20, 3, 6.0);
    const double rec = beam_mi_dense(r.cells(), p).value;
    const double direct = beam_mi_dense_direct(r.cells(), p).value;
    ASSERT_LE(oracle::rel(rec, direct), 1e-12);
  }
}

TEST(BeamMiSrle, SingleRunEqualsDense) {
  std::mt19937_64 rng(53);
  for (int t = 0; t < 200; ++t) {
    const std::size_t k = 1 + t % 3;
    const SensorParams p = oracle::random_params(rng, k);
    const LogOddsVector h = oracle::random_h(rng, k, -6, 6), h0 = oracle::random_h(rng, k, -1, 1);
    const std::uint32_t w = 1 + rng() % 40;
    SrleRay ray;
    ray.push(h, h0, w);
    const std::vector<RayCell> cells(w, RayCell{h.values(), h0.values()});
    ASSERT_LE(oracle::rel(beam_mi_srle(ray, p).value, beam_mi_dense(cells, p).value), 1e-10);
  }
}

TEST(BeamMiSrle, UnitWidthsMatchDenseTermByTerm) {
  std::mt19937_64 rng(54);
  const SensorParams p = oracle::random_params(rng, 3);
  Ray r = random_ray(rng, 7, 3, 5);
  r.h[2] = r.h[1] + LogOddsVector{0, 0.25, 0, 0};
  const BeamMI dense = beam_mi_dense(r.cells(), p, true);
  SrleRay ray;
  for (std::size_t i = 0; i < r.h.size(); ++i) ray.runs.push_back({1, r.h[i], r.h0[i]});
  const BeamMI srle = beam_mi_srle(ray, p, true);
  ASSERT_EQ(dense.terms.size(), srle.terms.size());
  for (std::size_t i = 0; i < dense.terms.size(); ++i) {
    EXPECT_NEAR(srle.terms[i].probability, dense.terms[i].probability, 1e-15);
    EXPECT_NEAR(srle.terms[i].accumulated, dense.terms[i].accumulated, 1e-12);
  }
  EXPECT_NEAR(srle.value, dense.value, 1e-12);
}

TEST(BeamMiSrle, NearlyCertainFreeRunMatchesDense) {
  std::mt19937_64 rng(61);
  for (std::size_t k = 1; k <= 3; ++k) {
    const SensorParams p = SensorParams::make_default(k, 0.65, 40.0);
    for (double pi0 : {1 - 1e-13, 1 - 1e-9, 0.999, 0.5}) {
      const LogOddsVector h = sim::logodds_with_free_mass(k, pi0), h0(k);
      const LogOddsVector wall = oracle::random_h(rng, k, -1, 2);
      for (std::uint32_t w : {1u, 2u, 7u, 16u, 200u}) {
        SrleRay ray;
        ray.push(h, h0, w);
        ray.push(wall, h0, 3);
        std::vector<RayCell> cells(w, RayCell{h.values(), h0.values()});
        for (int i = 0; i < 3; ++i) cells.push_back({wall.values(), h0.values()});
        const double dense = beam_mi_dense(cells, p).value;
        ASSERT_LE(oracle::rel(beam_mi_srle(ray, p).value, dense), 1e-9) << "pi0 " << pi0 << " w " << w;
      }
    }
  }
}

TEST(BeamMiSrleProperty, EqualsDenseOnExpandedRay) {
  std::mt19937_64 rng(55);
  double worst = 0;
  for (int t = 0; t < 1500; ++t) {
    const std::size_t k = 1 + t % 3, q = 1 + rng() % 6;
    const SensorParams p = oracle::random_params(rng, k);
    SrleRay ray;
    for (std::size_t i = 0; i < q; ++i) {
      ray.runs.push_back({static_cast<std::uint32_t>(1 + rng() % 16), oracle::random_h(rng, k, -6, 6),
                          oracle::random_h(rng, k, -1, 1)});
    }
    const double srle = beam_mi_srle(ray, p).value;
    const double dense = beam_mi_dense(expand(ray), p).value;
    worst = std::max(worst, oracle::rel(srle, dense));
    ASSERT_LE(oracle::rel(srle, dense), 1e-10) << "trial " << t;
    ASSERT_LE(oracle::rel(beam_mi_srle_direct(ray, p).value, srle), 1e-12);
  }
  RecordProperty("worst_relative_error", std::to_string(worst));
}

TEST(SrleEncoding, RoundTrip) {
  std::mt19937_64 rng(56);
  const LogOddsVector a = oracle::random_h(rng, 2, -3, 3), b = oracle::random_h(rng, 2, -3, 3), h0(2);
  const std::vector<RayCell> cells{{a.values(), h0.values()}, {a.values(), h0.values()}, {b.values(), h0.values()},
                                   {a.values(), h0.values()}};
  const SrleRay r = encode(cells);
  ASSERT_EQ(r.run_count(), 3u);
  EXPECT_EQ(r.runs[0].width, 2u);
  EXPECT_EQ(r.element_count(), 4u);
  EXPECT_EQ(encode(expand(r)), r);
}

TEST(SelectNonOverlapping, Examples) {
  const GridFrame f{{16, 16, 1}, 1.0, {}};
  std::vector<RayTrace> parallel;
  for (int y = 0; y < 5; ++y) parallel.push_back(cast_ray(f, beam({0.5, 2.0 * y + 0.5, 0.5}, {1, 0, 0}, 10)));
  EXPECT_EQ(select_nonoverlapping(parallel).size(), 5u);

  const std::vector<RayTrace> twins{parallel[0], parallel[0]};
  EXPECT_EQ(select_nonoverlapping(twins), (std::vector<std::size_t>{0}));
}

TEST(SelectNonOverlappingProperty, FanSubsetIsDisjointAndMaximal) {
  std::mt19937_64 rng(57);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const GridFrame f{{20, 20, 1}, 1.0, {}};
  for (int t = 0; t < 200; ++t) {
    const Vec3 o{1 + u(rng) * 18, 1 + u(rng) * 18, 0.5};
    std::vector<RayTrace> traces;
    for (int b = 0; b < 8; ++b) {
      const double a = 2 * std::numbers::pi * b / 8 + u(rng);
      traces.push_back(cast_ray(f, beam(o + Vec3{u(rng) * 2 - 1, u(rng) * 2 - 1, 0}, {std::cos(a), std::sin(a), 0}, 6)));
    }
    // Shifted origins may leave the frame; such beams are skipped.
    const auto kept = select_nonoverlapping(traces);
    auto share = [&](std::size_t i, std::size_t j) {
      for (std::size_t a : traces[i].cell_indices) {
        for (std::size_t b : traces[j].cell_indices) {
          if (a == b) return true;
        }
      }
      return false;
    };
    for (std::size_t i = 0; i < kept.size(); ++i) {
      for (std::size_t j = i + 1; j < kept.size(); ++j) ASSERT_FALSE(share(kept[i], kept[j]));
    }
    for (std::size_t b = 0; b < traces.size(); ++b) {
      if (std::find(kept.begin(), kept.end(), b) != kept.end()) continue;
      bool blocked = false;
      for (std::size_t k : kept) blocked = blocked || (k < b && share(k, b));
      ASSERT_TRUE(blocked);
    }
  }
}

TEST(TrajectoryMi, Examples) {
  std::mt19937_64 rng(58);
  const SensorParams p = SensorParams::make_default(3);
  GridMap m(GridFrame{{16, 16, 1}, 1.0, {}}, LogOddsVector(3));
  for (std::size_t i = 0; i < m.cell_count(); ++i) m.set(i, oracle::random_h(rng, 3, -3, 3));
  const BeamMeasurement a = beam({0.5, 0.5, 0.5}, {1, 0, 0}, 10), b = beam({0.5, 5.5, 0.5}, {1, 0, 0}, 10);
  const double mi_a = beam_mi_dense(ray_cells(m, cast_ray(m, a)), p).value;
  const double mi_b = beam_mi_dense(ray_cells(m, cast_ray(m, b)), p).value;
  const std::vector<BeamMeasurement> one{a}, two{a, b}, dup{a, a};
  EXPECT_EQ(trajectory_mi(m, one, p).value, mi_a);
  EXPECT_NEAR(trajectory_mi(m, two, p).value, mi_a + mi_b, 1e-12);
  const TrajectoryMI d = trajectory_mi(m, dup, p);
  EXPECT_EQ(d.value, mi_a);
  EXPECT_EQ(d.beams_dropped(), 1u);
  EXPECT_NEAR(trajectory_mi(m, dup, p, OverlapPolicy::None).value, 2 * mi_a, 1e-12);
}

TEST(TrajectoryMiProperty, FilteredNeverExceedsNaiveSum) {
  std::mt19937_64 rng(59);
  const SensorParams p = SensorParams::make_default(2);
  sim::TwoWallScene s = sim::TwoWallScene::build();
  for (int t = 0; t < 100; ++t) {
    GridMap m = s.map;
    for (std::size_t i = 0; i < m.cell_count(); ++i) {
      if (rng() % 4 == 0) m.set(i, oracle::random_h(rng, 2, -4, 4));
    }
    const BeamFan fan{36, 360, 8, {0}};
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto beams = fan.beams({1 + u(rng) * 46, 1 + u(rng) * 14, 0.5}, u(rng) * 6);
    const auto more = fan.beams({1 + u(rng) * 46, 1 + u(rng) * 14, 0.5}, 0);
    beams.insert(beams.end(), more.begin(), more.end());
    const double naive = trajectory_mi(m, beams, p, OverlapPolicy::None).value;
    for (OverlapPolicy policy : {OverlapPolicy::Strict, OverlapPolicy::IgnoreOrigin}) {
      const TrajectoryMI f = trajectory_mi(m, beams, p, policy);
      ASSERT_LE(f.value, naive + 1e-12);
      ASSERT_GE(f.value, 0.0);
    }
  }
}

TEST(TrajectoryMiProperty, OctreeAgreesWithGrid) {
  std::mt19937_64 rng(60);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> n(0.0, 1.0);
  for (std::size_t k = 1; k <= 3; ++k) {
    const SensorParams p = SensorParams::make_default(k);
    SemanticOctree t(4, 1.0, {}, LogOddsVector(k), p);
    GridMap g(t.frame(), LogOddsVector(k));
    for (int i = 0; i < 200; ++i) {
      const double r_max = 3 + 10 * u(rng);
      const BeamMeasurement b{{u(rng) * 16, u(rng) * 16, u(rng) * 16}, Vec3{n(rng), n(rng), n(rng)}.normalized(),
                              u(rng) * r_max, static_cast<ClassId>(1 + i % k), r_max};
      const std::vector<BeamMeasurement> one{b};
      t.insert_scan(one, p);
      integrate(g, b, p);
    }
    const BeamFan fan{24, 360, 10, {-20, 0, 20}};
    for (int i = 0; i < 20; ++i) {
      const auto beams = fan.beams({u(rng) * 16, u(rng) * 16, u(rng) * 16}, u(rng) * 6);
      for (bool binary : {false, true}) {
        const SensorParams used = binary ? collapse_to_binary(p) : p;
        const TrajectoryMI a = trajectory_mi(g, beams, used, OverlapPolicy::IgnoreOrigin, binary);
        const TrajectoryMI b = trajectory_mi(t, beams, used, OverlapPolicy::IgnoreOrigin, binary);
        ASSERT_EQ(a.beams_kept, b.beams_kept);
        ASSERT_LE(oracle::rel(b.value, a.value), 1e-10);
        ASSERT_FALSE(b.approximate);
      }
    }
  }
}

TEST(TwoWallScene, AmbiguousWallIsMoreInformative) {
  const sim::TwoWallScene s = sim::TwoWallScene::build();
  const SensorParams p = SensorParams::make_default(2);
  const BeamFan fan{90, 360, 8, {0}};
  auto best = [](const std::vector<sim::SurfaceCell>& surface, const std::vector<std::size_t>& region) {
    std::map<std::size_t, double> by_index;
    for (const auto& c : surface) by_index[c.index] = c.mi;
    double m = 0;
    for (std::size_t i : region) m = std::max(m, by_index.at(i));
    return m;
  };
  const auto multi = sim::mi_surface(s.map, fan, p, OverlapPolicy::IgnoreOrigin, false);
  const auto binary = sim::mi_surface(s.map, fan, p, OverlapPolicy::IgnoreOrigin, true);
  EXPECT_GT(best(multi, s.near_green), best(multi, s.near_red));
  EXPECT_NEAR(best(binary, s.near_green), best(binary, s.near_red), 1e-9);
  // Tiles are identical apart from the wall labels, so binary surfaces match cell by cell.
  std::map<std::size_t, double> by_index;
  for (const auto& c : binary) by_index[c.index] = c.mi;
  for (std::size_t j = 0; j < s.near_red.size(); ++j) {
    EXPECT_NEAR(by_index.at(s.near_red[j]), by_index.at(s.near_green[j]), 1e-9);
  }
}
