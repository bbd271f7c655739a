#pragma once

// Closed exploration loop: sense, integrate, plan, walk, repeat.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include "ssmi/gridmap.hpp"
#include "ssmi/io.hpp"
#include "ssmi/octree.hpp"
#include "ssmi/planner.hpp"
#include "ssmi/sim/config.hpp"
#include "ssmi/sim/environment.hpp"
#include "ssmi/sim/sensor.hpp"

namespace ssmi::sim {

struct MetricsRow {
  int step = 0;
  double distance = 0.0;  // m
  double entropy = 0.0;   // nats
  double explored = 0.0;
  double mi = 0.0;  // of the chosen plan; 0 for the frontier selector
  std::size_t frontiers = 0;
  std::size_t poses = 0;
  double plan_time = 0.0;  // s; kept out of the metrics file
};

struct PlanRecord {
  int step = 0;
  std::size_t frontier = 0;
  std::size_t cells = 0;
  bool reachable = false;
  double cost = 0.0;
  double mi = 0.0;
  double score = 0.0;
  bool chosen = false;
};

enum class StopReason { StepCap, NoFrontiers, AllUnreachable, Explored, Aborted };

inline std::string to_string(StopReason r) {
  switch (r) {
    case StopReason::StepCap: return "step-cap";
    case StopReason::NoFrontiers: return "no-frontiers";
    case StopReason::AllUnreachable: return "all-unreachable";
    case StopReason::Explored: return "explored";
    case StopReason::Aborted: return "aborted";
  }
  return "?";
}

struct EpisodeResult {
  std::uint64_t config_hash = 0;
  std::uint64_t env_hash = 0;
  std::vector<MetricsRow> rows;
  std::vector<PlanRecord> plans;
  StopReason stop = StopReason::StepCap;
  std::string error;  // set when aborted
  double final_distance = 0.0;
  double final_explored = 0.0;
  std::optional<double> distance_at_target;  // first time explored >= stop_explored
  std::vector<std::optional<double>> class_precision;  // index k - 1 for class k
};

/// The map being built, either dense or octree.
class Mapper {
 public:
  Mapper(const Environment& env, const Config& cfg)
      : params_(cfg.model.params(env.num_classes)), env_frame_(env.frame) {
    const LogOddsVector prior = cfg.model.prior_vector(env.num_classes);
    if (cfg.mapper.kind == MapperKind::Grid) {
      map_.emplace<GridMap>(env.frame, prior);
    } else {
      const std::int32_t extent = std::max({env.frame.dims[0], env.frame.dims[1], env.frame.dims[2]});
      int depth = 1;
      while ((std::int32_t{1} << depth) < extent) ++depth;
      map_.emplace<SemanticOctree>(depth, env.frame.resolution, env.frame.origin, prior, params_,
                                   cfg.mapper.fusion);
    }
  }

  const SensorParams& params() const { return params_; }
  bool is_grid() const { return std::holds_alternative<GridMap>(map_); }
  const GridMap& grid() const { return std::get<GridMap>(map_); }
  const SemanticOctree& octree() const { return std::get<SemanticOctree>(map_); }

  void integrate_scan(std::span<const BeamMeasurement> beams) {
    if (auto* g = std::get_if<GridMap>(&map_)) {
      for (const BeamMeasurement& b : beams) integrate(*g, b, params_);
    } else {
      std::get<SemanticOctree>(map_).insert_scan(beams, params_);
    }
  }

  /// Belief of environment cell `i`.
  LogOddsVector belief(std::size_t i) const {
    if (is_grid()) return grid().value(i);
    return octree().query(env_frame_.key(i)).to_full();
  }

  bool is_observed(std::size_t i) const {
    if (is_grid()) return grid().is_observed(i);
    return !(octree().query(env_frame_.key(i)) == octree().prior_semantics());
  }

  /// Summed entropy over the environment's cells.
  double entropy() const {
    if (is_grid()) return map_entropy(grid());
    double total = 0.0;
    for (std::size_t i = 0; i < env_frame_.cell_count(); ++i) total += ssmi::entropy(belief(i));
    return total;
  }

  PlanningGrid project(HeightBand band) const {
    if (is_grid()) return ssmi::project(grid(), band);
    return ssmi::project(octree(), env_frame_.dims[0], env_frame_.dims[1], band);
  }

  PlanResult plan(const PlanningGrid& g, std::size_t start, double heading,
                  const PlannerConfig& cfg) const {
    if (is_grid()) return select_plan(grid(), g, start, heading, params_, cfg);
    return select_plan(octree(), g, start, heading, params_, cfg);
  }

  void save(const std::string& path) const {
    if (is_grid()) {
      save_grid(path, grid());
    } else {
      save_octree(path, octree());
    }
  }

 private:
  SensorParams params_;
  GridFrame env_frame_;
  std::variant<GridMap, SemanticOctree> map_{std::in_place_type<GridMap>, GridFrame{{1, 1, 1}, 1.0, {}},
                                             LogOddsVector(1)};
};

/// Called after every planning cycle with the mapper and the new row.
using CycleHook = std::function<void(const Mapper&, const MetricsRow&)>;

struct EpisodeOutputs {
  Mapper mapper;
  EpisodeResult result;
};

namespace detail {

/// Observed-set tracker; a cell stays explored once seen.
class ExploredTracker {
 public:
  explicit ExploredTracker(const Environment& env) : observable_(observable_cells(env)) {
    seen_.assign(observable_.size(), 0);
    for (char c : observable_) total_ += c ? 1 : 0;
  }

  double update(const Mapper& m) {
    for (std::size_t i = 0; i < observable_.size(); ++i) {
      if (observable_[i] && !seen_[i] && m.is_observed(i)) {
        seen_[i] = 1;
        ++count_;
      }
    }
    return fraction();
  }

  double fraction() const { return total_ ? static_cast<double>(count_) / static_cast<double>(total_) : 1.0; }

 private:
  std::vector<char> observable_;
  std::vector<char> seen_;
  std::size_t total_ = 0, count_ = 0;
};

inline std::vector<std::optional<double>> class_precision(const Environment& env, const Mapper& m) {
  std::vector<std::size_t> predicted(env.num_classes, 0), correct(env.num_classes, 0);
  for (std::size_t i = 0; i < env.truth.size(); ++i) {
    if (!m.is_observed(i)) continue;
    const ClassId c = most_likely_class(m.belief(i));
    if (c == 0) continue;
    ++predicted[c - 1];
    if (env.at(i) == c) ++correct[c - 1];
  }
  std::vector<std::optional<double>> out(env.num_classes);
  for (std::size_t k = 0; k < env.num_classes; ++k) {
    if (predicted[k]) out[k] = static_cast<double>(correct[k]) / static_cast<double>(predicted[k]);
  }
  return out;
}

}  // namespace detail

inline EpisodeOutputs run_episode(const Config& cfg, const CycleHook& hook = {}) {
  const Environment env = generate_env(cfg.episode.seed, cfg.env);
  EpisodeOutputs out{Mapper(env, cfg), {}};
  Mapper& mapper = out.mapper;
  EpisodeResult& res = out.result;
  res.config_hash = config_hash(cfg);
  res.env_hash = env_hash(env);

  Rng sensor_rng = RngStreams(cfg.episode.seed).stream("sensor");
  const PlannerConfig pcfg = cfg.planner.resolve(cfg.sensor);
  const double res_m = env.frame.resolution;
  detail::ExploredTracker explored(env);

  const GridKey spawn = env.frame.key(env.spawn_cells.at(0));
  const std::int32_t z_sense = std::clamp(cfg.planner.band.z_lo, 0, env.frame.dims[2] - 1);
  Pose pose{env.frame.center({spawn.x, spawn.y, z_sense}), 0.0};
  double distance = 0.0;
  bool done = false;

  auto sense_here = [&] {
    const auto beams = sense(env, pose, cfg.sensor, sensor_rng);
    mapper.integrate_scan(beams);
    const double f = explored.update(mapper);
    if (f >= cfg.episode.stop_explored && !res.distance_at_target) {
      res.distance_at_target = distance;
      done = true;
    }
  };

  try {
    if (cfg.episode.step_cap > 0) sense_here();
    for (int step = 1; step <= cfg.episode.step_cap && !done; ++step) {
      const PlanningGrid g = mapper.project(cfg.planner.band);
      const std::size_t start = g.cell_of(pose.position);
      MetricsRow row;
      row.step = step;
      PlanResult plan;
      const auto t0 = std::chrono::steady_clock::now();
      try {
        plan = mapper.plan(g, start, pose.heading, pcfg);
      } catch (const NoFrontiers&) {
        res.stop = StopReason::NoFrontiers;
        break;
      } catch (const AllUnreachable&) {
        res.stop = StopReason::AllUnreachable;
        break;
      }
      row.plan_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      for (const CandidatePlan& c : plan.candidates) {
        res.plans.push_back({step, c.frontier_index, plan.frontiers[c.frontier_index].cells.size(),
                             c.reachable, c.cost, c.mi, c.score,
                             c.frontier_index == plan.chosen.frontier_index});
      }

      const auto& cells = plan.chosen.path.cells;
      const auto poses = sensing_poses(g, plan.chosen.path, pcfg.pose_stride, pose.heading);
      std::size_t next_pose = 0;
      if (cells.size() == 1) {
        pose.position = poses[0].position;
        sense_here();
      }
      for (std::size_t i = 1; i < cells.size() && !done; ++i) {
        const Vec3 next = g.center(cells[i]);
        if (!env.is_free(env.frame.index(env.frame.key_of(next)))) {
          // Blocked by an obstacle the map still believes free: look again.
          sense_here();
          break;
        }
        const bool diagonal = g.x_of(cells[i]) != g.x_of(cells[i - 1]) && g.y_of(cells[i]) != g.y_of(cells[i - 1]);
        distance += diagonal ? res_m * std::numbers::sqrt2 : res_m;
        pose.position = next;
        if (i % static_cast<std::size_t>(pcfg.pose_stride) == 0 || i + 1 == cells.size()) {
          pose.heading = poses.at(next_pose++).heading;
          sense_here();
        }
      }

      row.distance = distance;
      row.entropy = mapper.entropy();
      row.explored = explored.fraction();
      row.mi = plan.chosen.mi;
      row.frontiers = plan.frontiers.size();
      row.poses = plan.chosen.poses;
      res.rows.push_back(row);
      if (hook) hook(mapper, row);
    }
    if (done) res.stop = StopReason::Explored;
  } catch (const Error& e) {
    res.stop = StopReason::Aborted;
    res.error = e.what();
  }
  res.final_distance = distance;
  res.final_explored = explored.fraction();
  res.class_precision = detail::class_precision(env, mapper);
  return out;
}

inline std::string format_g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline void write_metrics_csv(std::ostream& os, const EpisodeResult& r) {
  os << "# config-hash: " << hex64(r.config_hash) << "\n";
  os << "# env-hash: " << hex64(r.env_hash) << "\n";
  os << "step,distance,entropy,explored,mi,frontiers,poses\n";
  for (const MetricsRow& m : r.rows) {
    os << m.step << ',' << format_g(m.distance) << ',' << format_g(m.entropy) << ','
       << format_g(m.explored) << ',' << format_g(m.mi) << ',' << m.frontiers << ',' << m.poses << "\n";
  }
}

inline void write_timing_csv(std::ostream& os, const EpisodeResult& r) {
  os << "# config-hash: " << hex64(r.config_hash) << "\n";
  os << "step,plan_time\n";
  for (const MetricsRow& m : r.rows) os << m.step << ',' << format_g(m.plan_time) << "\n";
}

inline void write_plan_log(std::ostream& os, const EpisodeResult& r) {
  os << "# config-hash: " << hex64(r.config_hash) << "\n";
  os << "step,frontier,cells,reachable,cost,mi,score,chosen\n";
  for (const PlanRecord& p : r.plans) {
    os << p.step << ',' << p.frontier << ',' << p.cells << ',' << (p.reachable ? 1 : 0) << ','
       << format_g(p.cost) << ',' << format_g(p.mi) << ',' << format_g(p.score) << ','
       << (p.chosen ? 1 : 0) << "\n";
  }
}

inline nlohmann::json summary_json(const EpisodeResult& r) {
  nlohmann::json j;
  j["config_hash"] = hex64(r.config_hash);
  j["env_hash"] = hex64(r.env_hash);
  j["stop"] = to_string(r.stop);
  if (!r.error.empty()) j["error"] = r.error;
  j["steps"] = r.rows.size();
  j["distance"] = r.final_distance;
  j["explored"] = r.final_explored;
  j["distance_at_target"] = r.distance_at_target ? nlohmann::json(*r.distance_at_target) : nlohmann::json(nullptr);
  nlohmann::json prec = nlohmann::json::array();
  for (const auto& p : r.class_precision) prec.push_back(p ? nlohmann::json(*p) : nlohmann::json(nullptr));
  j["class_precision"] = prec;
  return j;
}

/// Ground truth as a dense map: each cell saturated towards its true class.
inline GridMap truth_map(const Environment& env, double level = 6.0) {
  GridMap m(env.frame, LogOddsVector(env.num_classes));
  for (std::size_t i = 0; i < env.truth.size(); ++i) {
    LogOddsVector h(env.num_classes);
    for (std::size_t k = 1; k <= env.num_classes; ++k) h.set(k, env.at(i) == k ? level : -level);
    m.set(i, h);
  }
  return m;
}

}  // namespace ssmi::sim
