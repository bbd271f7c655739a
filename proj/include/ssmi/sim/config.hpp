#pragma once

// Run configuration and its JSON form. Every key is optional; missing keys
// keep the defaults below and unknown keys are rejected.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ssmi/errors.hpp"
#include "ssmi/logodds.hpp"
#include "ssmi/octree.hpp"
#include "ssmi/planner.hpp"
#include "ssmi/sim/environment.hpp"
#include "ssmi/sim/rng.hpp"
#include "ssmi/sim/sensor.hpp"

namespace ssmi::sim {

struct ModelSpec {
  double true_positive_rate = 0.65;
  double clamp = 6.0;
  double alpha = 0.5;
  // Full K+1 vectors override the defaults derived from the scalars above.
  std::optional<std::vector<double>> phi_plus, phi_minus, psi_plus, prior;

  SensorParams params(std::size_t num_classes) const {
    SensorParams p = SensorParams::make_default(num_classes, true_positive_rate, clamp);
    p.alpha = alpha;
    auto take = [&](const std::optional<std::vector<double>>& v, LogOddsVector& dst, const char* name) {
      if (!v) return;
      if (v->size() != num_classes + 1) {
        throw ClassCountMismatch(std::string("model.") + name + " needs K+1 entries");
      }
      dst = LogOddsVector::from_values(*v);
    };
    take(phi_plus, p.phi_plus, "phi_plus");
    take(phi_minus, p.phi_minus, "phi_minus");
    take(psi_plus, p.psi_plus, "psi_plus");
    p.validate();
    return p;
  }

  LogOddsVector prior_vector(std::size_t num_classes) const {
    if (!prior) return LogOddsVector(num_classes);
    if (prior->size() != num_classes + 1) throw ClassCountMismatch("model.prior needs K+1 entries");
    return LogOddsVector::from_values(*prior);
  }
};

enum class MapperKind { Grid, Octree };

inline std::string to_string(MapperKind m) { return m == MapperKind::Grid ? "grid" : "octree"; }

inline MapperKind mapper_from_string(const std::string& s) {
  if (s == "grid") return MapperKind::Grid;
  if (s == "octree") return MapperKind::Octree;
  throw InvalidArgument("unknown mapper '" + s + "'");
}

struct MapperSpec {
  MapperKind kind = MapperKind::Grid;
  FusionMode fusion = FusionMode::MortonFold;
};

inline std::string to_string(OverlapPolicy p) {
  switch (p) {
    case OverlapPolicy::Strict: return "strict";
    case OverlapPolicy::IgnoreOrigin: return "ignore-origin";
    case OverlapPolicy::None: return "none";
  }
  return "?";
}

inline OverlapPolicy overlap_from_string(const std::string& s) {
  if (s == "strict") return OverlapPolicy::Strict;
  if (s == "ignore-origin") return OverlapPolicy::IgnoreOrigin;
  if (s == "none") return OverlapPolicy::None;
  throw InvalidArgument("unknown overlap policy '" + s + "'");
}

struct PlannerSpec {
  Selector selector = Selector::Ssmi;
  std::size_t min_frontier_size = 3;
  int pose_stride = 3;
  int num_beams = 24;
  double fov_deg = 360.0;
  std::optional<double> max_range;  // defaults to the sensor's
  std::vector<double> elevations_deg{0.0};
  OverlapPolicy overlap = OverlapPolicy::IgnoreOrigin;
  HeightBand band{};
  unsigned jobs = 1;

  PlannerConfig resolve(const SensorSpec& sensor) const {
    PlannerConfig c;
    c.selector = selector;
    c.min_frontier_size = min_frontier_size;
    c.pose_stride = pose_stride;
    c.fan = BeamFan{num_beams, fov_deg, max_range.value_or(sensor.max_range), elevations_deg};
    c.overlap = overlap;
    c.jobs = jobs;
    return c;
  }
};

struct EpisodeSpec {
  std::uint64_t seed = 1;
  int step_cap = 200;
  double stop_explored = 1.0;  // stop once this fraction is explored
};

struct SweepSpec {
  std::vector<std::uint64_t> seeds;
  std::vector<Selector> selectors;
};

struct StudySpec {
  std::vector<int> resolutions{1, 2, 4, 8};  // elements per metre
  int iterations = 5;
  int poses_per_iteration = 20;
  int num_beams = 36;
  std::vector<double> elevations_deg{-30.0, -15.0, 0.0, 15.0, 30.0};
  double max_range = 8.0;
};

struct Config {
  EnvSpec env;
  SensorSpec sensor;
  ModelSpec model;
  MapperSpec mapper;
  PlannerSpec planner;
  EpisodeSpec episode;
  SweepSpec sweep;
  StudySpec study;
};

namespace detail {

using nlohmann::json;

inline void check_keys(const json& j, const std::string& section, std::set<std::string> allowed) {
  if (!j.is_object()) throw InvalidArgument("config section '" + section + "' must be an object");
  for (const auto& [k, v] : j.items()) {
    if (!allowed.count(k)) throw InvalidArgument("unknown config key '" + section + "." + k + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& dst) {
  if (j.contains(key)) dst = j.at(key).get<T>();
}

template <typename T>
void read(const json& j, const char* key, std::optional<T>& dst) {
  if (j.contains(key)) {
    if (j.at(key).is_null()) {
      dst.reset();
    } else {
      dst = j.at(key).get<T>();
    }
  }
}

template <typename T>
json opt(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

}  // namespace detail

inline nlohmann::json to_json(const Config& c) {
  using nlohmann::json;
  json j;
  j["env"] = {{"profile", to_string(c.env.profile)},
              {"dims", c.env.dims},
              {"resolution", c.env.resolution},
              {"num_classes", c.env.num_classes},
              {"target_occupancy", c.env.target_occupancy},
              {"min_block", c.env.min_block},
              {"max_block", c.env.max_block}};
  j["sensor"] = {{"num_beams", c.sensor.num_beams},
                 {"fov_deg", c.sensor.fov_deg},
                 {"max_range", c.sensor.max_range},
                 {"range_noise", c.sensor.range_noise},
                 {"misclassification", c.sensor.misclassification},
                 {"elevations_deg", c.sensor.elevations_deg}};
  j["model"] = {{"true_positive_rate", c.model.true_positive_rate},
                {"clamp", c.model.clamp},
                {"alpha", c.model.alpha},
                {"phi_plus", detail::opt(c.model.phi_plus)},
                {"phi_minus", detail::opt(c.model.phi_minus)},
                {"psi_plus", detail::opt(c.model.psi_plus)},
                {"prior", detail::opt(c.model.prior)}};
  j["mapper"] = {{"kind", to_string(c.mapper.kind)},
                 {"fusion", c.mapper.fusion == FusionMode::Mean ? "mean" : "morton-fold"}};
  j["planner"] = {{"selector", to_string(c.planner.selector)},
                  {"min_frontier_size", c.planner.min_frontier_size},
                  {"pose_stride", c.planner.pose_stride},
                  {"num_beams", c.planner.num_beams},
                  {"fov_deg", c.planner.fov_deg},
                  {"max_range", detail::opt(c.planner.max_range)},
                  {"elevations_deg", c.planner.elevations_deg},
                  {"overlap", to_string(c.planner.overlap)},
                  {"band", {c.planner.band.z_lo, c.planner.band.z_hi}},
                  {"jobs", c.planner.jobs}};
  j["episode"] = {{"seed", c.episode.seed},
                  {"step_cap", c.episode.step_cap},
                  {"stop_explored", c.episode.stop_explored}};
  json sel = json::array();
  for (Selector s : c.sweep.selectors) sel.push_back(to_string(s));
  j["sweep"] = {{"seeds", c.sweep.seeds}, {"selectors", sel}};
  j["study"] = {{"resolutions", c.study.resolutions},
                {"iterations", c.study.iterations},
                {"poses_per_iteration", c.study.poses_per_iteration},
                {"num_beams", c.study.num_beams},
                {"elevations_deg", c.study.elevations_deg},
                {"max_range", c.study.max_range}};
  return j;
}

inline Config config_from_json(const nlohmann::json& j) {
  using detail::read;
  Config c;
  try {
    detail::check_keys(j, "config",
                       {"env", "sensor", "model", "mapper", "planner", "episode", "sweep", "study"});
    if (j.contains("env")) {
      const auto& e = j.at("env");
      detail::check_keys(e, "env", {"profile", "dims", "resolution", "num_classes",
                                    "target_occupancy", "min_block", "max_block"});
      if (e.contains("profile")) c.env.profile = env_profile_from_string(e.at("profile").get<std::string>());
      read(e, "dims", c.env.dims);
      read(e, "resolution", c.env.resolution);
      read(e, "num_classes", c.env.num_classes);
      read(e, "target_occupancy", c.env.target_occupancy);
      read(e, "min_block", c.env.min_block);
      read(e, "max_block", c.env.max_block);
    }
    if (j.contains("sensor")) {
      const auto& s = j.at("sensor");
      detail::check_keys(s, "sensor", {"num_beams", "fov_deg", "max_range", "range_noise",
                                       "misclassification", "elevations_deg"});
      read(s, "num_beams", c.sensor.num_beams);
      read(s, "fov_deg", c.sensor.fov_deg);
      read(s, "max_range", c.sensor.max_range);
      read(s, "range_noise", c.sensor.range_noise);
      read(s, "misclassification", c.sensor.misclassification);
      read(s, "elevations_deg", c.sensor.elevations_deg);
    }
    if (j.contains("model")) {
      const auto& m = j.at("model");
      detail::check_keys(m, "model", {"true_positive_rate", "clamp", "alpha", "phi_plus",
                                      "phi_minus", "psi_plus", "prior"});
      read(m, "true_positive_rate", c.model.true_positive_rate);
      read(m, "clamp", c.model.clamp);
      read(m, "alpha", c.model.alpha);
      read(m, "phi_plus", c.model.phi_plus);
      read(m, "phi_minus", c.model.phi_minus);
      read(m, "psi_plus", c.model.psi_plus);
      read(m, "prior", c.model.prior);
    }
    if (j.contains("mapper")) {
      const auto& m = j.at("mapper");
      detail::check_keys(m, "mapper", {"kind", "fusion"});
      if (m.contains("kind")) c.mapper.kind = mapper_from_string(m.at("kind").get<std::string>());
      if (m.contains("fusion")) {
        const auto f = m.at("fusion").get<std::string>();
        if (f == "mean") {
          c.mapper.fusion = FusionMode::Mean;
        } else if (f == "morton-fold") {
          c.mapper.fusion = FusionMode::MortonFold;
        } else {
          throw InvalidArgument("unknown fusion mode '" + f + "'");
        }
      }
    }
    if (j.contains("planner")) {
      const auto& p = j.at("planner");
      detail::check_keys(p, "planner", {"selector", "min_frontier_size", "pose_stride", "num_beams",
                                        "fov_deg", "max_range", "elevations_deg", "overlap",
                                        "band", "jobs"});
      if (p.contains("selector")) c.planner.selector = selector_from_string(p.at("selector").get<std::string>());
      read(p, "min_frontier_size", c.planner.min_frontier_size);
      read(p, "pose_stride", c.planner.pose_stride);
      read(p, "num_beams", c.planner.num_beams);
      read(p, "fov_deg", c.planner.fov_deg);
      read(p, "max_range", c.planner.max_range);
      read(p, "elevations_deg", c.planner.elevations_deg);
      if (p.contains("overlap")) c.planner.overlap = overlap_from_string(p.at("overlap").get<std::string>());
      if (p.contains("band")) {
        const auto b = p.at("band").get<std::vector<std::int32_t>>();
        if (b.size() != 2) throw InvalidArgument("planner.band needs [z_lo, z_hi]");
        c.planner.band = {b[0], b[1]};
      }
      read(p, "jobs", c.planner.jobs);
    }
    if (j.contains("episode")) {
      const auto& e = j.at("episode");
      detail::check_keys(e, "episode", {"seed", "step_cap", "stop_explored"});
      read(e, "seed", c.episode.seed);
      read(e, "step_cap", c.episode.step_cap);
      read(e, "stop_explored", c.episode.stop_explored);
    }
    if (j.contains("sweep")) {
      const auto& s = j.at("sweep");
      detail::check_keys(s, "sweep", {"seeds", "selectors"});
      read(s, "seeds", c.sweep.seeds);
      if (s.contains("selectors")) {
        for (const auto& v : s.at("selectors")) c.sweep.selectors.push_back(selector_from_string(v.get<std::string>()));
      }
    }
    if (j.contains("study")) {
      const auto& s = j.at("study");
      detail::check_keys(s, "study", {"resolutions", "iterations", "poses_per_iteration",
                                      "num_beams", "elevations_deg", "max_range"});
      read(s, "resolutions", c.study.resolutions);
      read(s, "iterations", c.study.iterations);
      read(s, "poses_per_iteration", c.study.poses_per_iteration);
      read(s, "num_beams", c.study.num_beams);
      read(s, "elevations_deg", c.study.elevations_deg);
      read(s, "max_range", c.study.max_range);
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("config: ") + e.what());
  }
  if (c.episode.step_cap < 0) throw InvalidArgument("episode.step_cap must be >= 0");
  if (!(c.episode.stop_explored > 0.0 && c.episode.stop_explored <= 1.0)) {
    throw InvalidArgument("episode.stop_explored must lie in (0, 1]");
  }
  if (c.planner.jobs < 1) throw InvalidArgument("planner.jobs must be >= 1");
  c.sensor.validate();
  return c;
}

inline Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument("config '" + path + "': " + e.what());
  }
  return config_from_json(j);
}

/// Hash of the fully resolved configuration (defaults included). The worker
/// count does not change results and is left out.
inline std::uint64_t config_hash(const Config& c) {
  nlohmann::json j = to_json(c);
  j["planner"].erase("jobs");
  return fnv1a(j.dump());
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace ssmi::sim
