// ssmi: exploration runs, MI evaluation and map utilities.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "ssmi/ssmi.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ssmi;
using namespace ssmi::sim;

namespace {

constexpr int kOk = 0;
constexpr int kCheckFailed = 1;
constexpr int kUsage = 2;
constexpr int kRuntime = 3;

/// Raised for bad flags or configuration; maps to exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void init_logging() {
  auto logger = spdlog::stderr_color_mt("ssmi");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  const char* lvl = std::getenv("SSMI_LOG");
  spdlog::set_level(lvl ? spdlog::level::from_str(lvl) : spdlog::level::warn);
}

struct CommonOpts {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<unsigned> jobs;
  std::optional<std::string> selector;
  std::optional<std::string> mapper;
};

Config resolve_config(const CommonOpts& o) {
  Config c;
  try {
    if (!o.config.empty()) {
      if (!fs::exists(o.config)) throw UsageError("config file '" + o.config + "' does not exist");
      c = load_config(o.config);
    }
    if (o.seed) c.episode.seed = *o.seed;
    if (o.jobs) c.planner.jobs = *o.jobs;
    if (o.selector) c.planner.selector = selector_from_string(*o.selector);
    if (o.mapper) c.mapper.kind = mapper_from_string(*o.mapper);
    if (c.planner.jobs < 1) throw UsageError("--jobs must be >= 1");
  } catch (const ssmi::Error& e) {
    throw UsageError(e.what());
  }
  return c;
}

void print_resolved(const std::string& command, const json& resolved) {
  std::cout << "# " << command << " resolved config\n" << resolved.dump(2) << "\n";
}

template <typename Fn>
void write_file(const fs::path& path, Fn&& fn) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot write '" + path.string() + "'");
  fn(os);
}

/// Grid map from either on-disk format.
GridMap load_any_as_grid(const std::string& path) {
  if (!fs::exists(path)) throw UsageError("map file '" + path + "' does not exist");
  const std::string magic = sniff_magic(path);
  if (magic == "SSMIGRID") return load_grid(path);
  if (magic == "SSMIOCT1") return octree_to_grid(load_octree(path));
  throw FormatError("'" + path + "' is not a map file");
}

BeamFan make_fan(int beams, double fov, double range, const std::vector<double>& elev) {
  BeamFan f{beams, fov, range, elev};
  if (beams < 1 || !(range > 0.0) || !(fov > 0.0 && fov <= 360.0)) throw UsageError("invalid beam fan");
  return f;
}

// ---------------------------------------------------------------- explore

int cmd_explore(const CommonOpts& o) {
  const Config base = resolve_config(o);
  print_resolved("explore", to_json(base));
  std::vector<std::uint64_t> seeds = base.sweep.seeds;
  if (seeds.empty() || o.seed) seeds = {base.episode.seed};
  std::vector<Selector> selectors = base.sweep.selectors;
  if (selectors.empty() || o.selector) selectors = {base.planner.selector};
  const bool single = seeds.size() == 1 && selectors.size() == 1;
  const fs::path root = o.out.empty() ? fs::path("out") : fs::path(o.out);

  int code = kOk;
  for (Selector sel : selectors) {
    for (std::uint64_t seed : seeds) {
      Config cfg = base;
      cfg.planner.selector = sel;
      cfg.episode.seed = seed;
      const fs::path dir = single ? root : root / (to_string(sel) + "-seed" + std::to_string(seed));
      fs::create_directories(dir);
      spdlog::info("episode seed={} selector={} -> {}", seed, to_string(sel), dir.string());
      const EpisodeOutputs run = run_episode(cfg, [](const Mapper&, const MetricsRow& r) {
        spdlog::debug("step {} distance {:.2f} explored {:.3f}", r.step, r.distance, r.explored);
      });
      const EpisodeResult& res = run.result;
      write_file(dir / "metrics.csv", [&](std::ostream& os) { write_metrics_csv(os, res); });
      write_file(dir / "timing.csv", [&](std::ostream& os) { write_timing_csv(os, res); });
      write_file(dir / "plans.csv", [&](std::ostream& os) { write_plan_log(os, res); });
      write_file(dir / "summary.json", [&](std::ostream& os) { os << summary_json(res).dump(2) << "\n"; });
      write_file(dir / "config.json", [&](std::ostream& os) { os << to_json(cfg).dump(2) << "\n"; });
      run.mapper.save((dir / (run.mapper.is_grid() ? "map.ssmig" : "map.ssmio")).string());
      save_grid((dir / "truth.ssmig").string(), truth_map(generate_env(cfg.episode.seed, cfg.env)));
      std::cout << to_string(sel) << " seed " << seed << ": " << to_string(res.stop) << ", "
                << res.rows.size() << " steps, distance " << format_g(res.final_distance) << " m, explored "
                << format_g(res.final_explored) << "\n";
      if (res.stop == StopReason::Aborted) {
        spdlog::error("episode aborted: {}", res.error);
        code = kRuntime;
      }
    }
  }
  return code;
}

// ---------------------------------------------------------------- mi-eval

struct FanOpts {
  int beams = 24;
  double fov = 360.0;
  std::optional<double> range;
  std::vector<double> elevations{0.0};
  std::string overlap = "ignore-origin";
  bool binary = false;
};

void add_fan_options(CLI::App* sub, FanOpts& f) {
  sub->add_option("--beams", f.beams, "beams per fan")->capture_default_str();
  sub->add_option("--fov", f.fov, "fan field of view, degrees")->capture_default_str();
  sub->add_option("--range", f.range, "beam maximum range, m (default: sensor range)");
  sub->add_option("--elevations", f.elevations, "elevation rows, degrees")->capture_default_str();
  sub->add_option("--overlap", f.overlap, "strict | ignore-origin | none")->capture_default_str();
  sub->add_flag("--binary", f.binary, "evaluate the occupancy-only collapse");
}

json fan_json(const BeamFan& fan, const FanOpts& f) {
  return {{"beams", fan.num_beams}, {"fov_deg", fan.fov_deg}, {"max_range", fan.max_range},
          {"elevations_deg", fan.elevations_deg}, {"overlap", f.overlap}, {"binary", f.binary}};
}

int cmd_mi_eval(const CommonOpts& o, const std::string& map_path, const std::vector<double>& pose, const FanOpts& f) {
  const Config cfg = resolve_config(o);
  if (pose.size() != 4) throw UsageError("--pose needs x,y,z,heading");
  OverlapPolicy policy;
  try {
    policy = overlap_from_string(f.overlap);
  } catch (const ssmi::Error& e) {
    throw UsageError(e.what());
  }
  const BeamFan fan = make_fan(f.beams, f.fov, f.range.value_or(cfg.sensor.max_range), f.elevations);
  json resolved = to_json(cfg);
  resolved["mi_eval"] = {{"map", map_path}, {"pose", pose}, {"fan", fan_json(fan, f)}};
  print_resolved("mi-eval", resolved);
  if (!fs::exists(map_path)) throw UsageError("map file '" + map_path + "' does not exist");

  const auto beams = fan.beams({pose[0], pose[1], pose[2]}, pose[3]);
  TrajectoryMI mi;
  if (sniff_magic(map_path) == "SSMIOCT1") {
    const SemanticOctree tree = load_octree(map_path);
    const SensorParams p = cfg.model.params(tree.num_classes());
    mi = trajectory_mi(tree, beams, f.binary ? collapse_to_binary(p) : p, policy, f.binary);
  } else {
    const GridMap grid = load_grid(map_path);
    const SensorParams p = cfg.model.params(grid.num_classes());
    mi = trajectory_mi(grid, beams, f.binary ? collapse_to_binary(p) : p, policy, f.binary);
  }
  std::cout << json{{"mi", mi.value},
                    {"beams_total", mi.beams_total},
                    {"beams_kept", mi.beams_kept},
                    {"approximate", mi.approximate}}
                   .dump()
            << "\n";
  return kOk;
}

// ---------------------------------------------------------------- mi-surface

int cmd_mi_surface(const CommonOpts& o, const std::string& map_path, std::int32_t layer, double heading,
                   const FanOpts& f) {
  const Config cfg = resolve_config(o);
  if (o.out.empty()) throw UsageError("--out is required");
  OverlapPolicy policy;
  try {
    policy = overlap_from_string(f.overlap);
  } catch (const ssmi::Error& e) {
    throw UsageError(e.what());
  }
  const BeamFan fan = make_fan(f.beams, f.fov, f.range.value_or(cfg.sensor.max_range), f.elevations);
  json resolved = to_json(cfg);
  resolved["mi_surface"] = {{"map", map_path}, {"layer", layer}, {"heading", heading}, {"fan", fan_json(fan, f)}};
  print_resolved("mi-surface", resolved);

  const GridMap grid = load_any_as_grid(map_path);
  const SensorParams params = cfg.model.params(grid.num_classes());
  const auto cells = mi_surface(grid, fan, params, policy, f.binary, layer, heading);
  write_file(o.out, [&](std::ostream& os) { write_surface_csv(os, cells, fnv1a(resolved.dump())); });
  double lo = 0.0, hi = 0.0;
  if (!cells.empty()) {
    lo = hi = cells.front().mi;
    for (const SurfaceCell& c : cells) {
      lo = std::min(lo, c.mi);
      hi = std::max(hi, c.mi);
    }
  }
  std::cout << cells.size() << " cells, mi in [" << format_g(lo) << ", " << format_g(hi) << "] -> " << o.out << "\n";
  return kOk;
}

// ---------------------------------------------------------------- srle-study

int cmd_srle_study(const CommonOpts& o) {
  const Config cfg = resolve_config(o);
  print_resolved("srle-study", to_json(cfg));
  const SensorParams params = cfg.model.params(cfg.env.num_classes);
  const auto rows = srle_study(cfg.study, params, cfg.episode.seed);
  auto emit = [&](std::ostream& os) { write_study_csv(os, rows, config_hash(cfg)); };
  if (o.out.empty()) {
    emit(std::cout);
  } else {
    write_file(o.out, emit);
    emit(std::cout);
  }
  return kOk;
}

// ---------------------------------------------------------------- oracle-check

int cmd_oracle_check(const CommonOpts& o, long long trials, double tol, const std::string& replay) {
  if (!replay.empty()) {
    if (!fs::exists(replay)) throw UsageError("replay file '" + replay + "' does not exist");
    std::ifstream in(replay);
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw UsageError(std::string("replay file: ") + e.what());
    }
    const MiInstance inst = instance_from_json(j);
    print_resolved("oracle-check", {{"replay", replay}, {"tolerance", tol}});
    const CheckOutcome c = run_check(inst);
    std::cout << to_string(inst.kind) << ": value " << format_g(c.value) << " reference " << format_g(c.reference)
              << " abs " << format_g(c.abs_error) << " rel " << format_g(c.rel_error) << "\n";
    return c.rel_error <= tol ? kOk : kCheckFailed;
  }
  if (trials < 1) throw UsageError("--trials must be >= 1");
  const std::uint64_t seed = o.seed.value_or(1);
  const fs::path out = o.out.empty() ? fs::path("oracle-breach.json") : fs::path(o.out);
  print_resolved("oracle-check", {{"trials", trials}, {"seed", seed}, {"tolerance", tol}, {"breach_file", out.string()}});

  Rng rng = RngStreams(seed).stream("oracle-check");
  bool breached = false;
  for (CheckKind kind : {CheckKind::DenseVsOracle, CheckKind::SrleVsDense}) {
    double max_abs = 0.0, max_rel = 0.0;
    for (long long t = 0; t < trials; ++t) {
      const MiInstance inst = kind == CheckKind::DenseVsOracle ? random_dense_instance(rng) : random_srle_instance(rng);
      const CheckOutcome c = run_check(inst);
      max_abs = std::max(max_abs, c.abs_error);
      max_rel = std::max(max_rel, c.rel_error);
      if (!(c.rel_error <= tol) && !breached) {
        breached = true;
        write_file(out, [&](std::ostream& os) { os << to_json(inst).dump(2) << "\n"; });
        spdlog::error("{} trial {} breached tolerance (rel {}); instance written to {}", to_string(kind), t,
                      c.rel_error, out.string());
      }
    }
    std::cout << to_string(kind) << ": " << trials << " trials, max abs " << format_g(max_abs) << ", max rel "
              << format_g(max_rel) << "\n";
  }
  return breached ? kCheckFailed : kOk;
}

// ---------------------------------------------------------------- map

int cmd_map_inspect(const std::string& path) {
  print_resolved("map inspect", {{"map", path}});
  if (!fs::exists(path)) throw UsageError("map file '" + path + "' does not exist");
  const std::string magic = sniff_magic(path);
  json info;
  if (magic == "SSMIGRID") {
    const GridMap g = load_grid(path);
    std::size_t observed = 0;
    for (std::size_t i = 0; i < g.cell_count(); ++i) observed += g.is_observed(i) ? 1 : 0;
    info = {{"type", "grid"},
            {"dims", g.frame().dims},
            {"resolution", g.frame().resolution},
            {"origin", {g.frame().origin.x, g.frame().origin.y, g.frame().origin.z}},
            {"num_classes", g.num_classes()},
            {"cells", g.cell_count()},
            {"observed", observed},
            {"entropy", map_entropy(g)}};
  } else if (magic == "SSMIOCT1") {
    const SemanticOctree t = load_octree(path);
    info = {{"type", "octree"},
            {"depth", t.max_depth()},
            {"element_size", t.element_size()},
            {"origin", {t.frame().origin.x, t.frame().origin.y, t.frame().origin.z}},
            {"num_classes", t.num_classes()},
            {"nodes", t.node_count()},
            {"leaves", t.leaf_count()},
            {"canonical", t.is_canonical()}};
  } else {
    throw FormatError("'" + path + "' is not a map file");
  }
  std::cout << info.dump(2) << "\n";
  return kOk;
}

int cmd_map_convert(const CommonOpts& o, const std::string& in, std::optional<double> resolution) {
  const Config cfg = resolve_config(o);
  if (o.out.empty()) throw UsageError("--out is required");
  print_resolved("map convert", {{"in", in}, {"out", o.out}, {"resolution", resolution ? json(*resolution) : json(nullptr)},
                                 {"model", to_json(cfg)["model"]}});
  if (!fs::exists(in)) throw UsageError("map file '" + in + "' does not exist");
  const std::string magic = sniff_magic(in);
  if (magic == "SSMIGRID") {
    const GridMap g = load_grid(in);
    const SemanticOctree t = grid_to_octree(g, cfg.model.params(g.num_classes()), resolution, cfg.mapper.fusion);
    save_octree(o.out, t);
    std::cout << "grid -> octree depth " << t.max_depth() << ", " << t.leaf_count() << " leaves\n";
  } else if (magic == "SSMIOCT1") {
    const GridMap g = octree_to_grid(load_octree(in), resolution);
    save_grid(o.out, g);
    std::cout << "octree -> grid " << g.frame().dims[0] << "x" << g.frame().dims[1] << "x" << g.frame().dims[2] << "\n";
  } else {
    throw FormatError("'" + in + "' is not a map file");
  }
  return kOk;
}

int cmd_map_make(const CommonOpts& o, const std::string& scene, int elements_per_metre) {
  const Config cfg = resolve_config(o);
  if (o.out.empty()) throw UsageError("--out is required");
  json resolved = to_json(cfg);
  resolved["map_make"] = {{"scene", scene}, {"elements_per_metre", elements_per_metre}};
  print_resolved("map make", resolved);
  if (scene == "two-wall") {
    save_grid(o.out, TwoWallScene::build().map);
  } else if (scene == "corridor") {
    try {
      save_octree(o.out, CorridorScene::build(elements_per_metre, cfg.env.num_classes, cfg.model.params(cfg.env.num_classes)));
    } catch (const InvalidArgument& e) {
      throw UsageError(e.what());
    }
  } else if (scene == "env") {
    save_grid(o.out, truth_map(generate_env(cfg.episode.seed, cfg.env)));
  } else {
    throw UsageError("unknown scene '" + scene + "' (two-wall, corridor, env)");
  }
  std::cout << scene << " -> " << o.out << "\n";
  return kOk;
}

void add_common(CLI::App* sub, CommonOpts& o, bool config = true, bool seed = true, bool run_flags = false) {
  if (config) sub->add_option("--config", o.config, "JSON configuration file");
  if (seed) sub->add_option("--seed", o.seed, "random seed");
  sub->add_option("--out", o.out, "output path");
  if (run_flags) {
    sub->add_option("--jobs", o.jobs, "worker threads for candidate evaluation");
    sub->add_option("--selector", o.selector, "ssmi | frontier | fsmi-binary");
    sub->add_option("--mapper", o.mapper, "grid | octree");
  }
}

}  // namespace

int main(int argc, char** argv) {
  init_logging();
  CLI::App app{"Semantic octree mutual information exploration toolkit", "ssmi"};
  app.require_subcommand(1);

  CommonOpts explore_o;
  auto* explore = app.add_subcommand("explore", "run exploration episodes and write metrics");
  add_common(explore, explore_o, true, true, true);

  CommonOpts eval_o;
  std::string eval_map;
  std::vector<double> eval_pose;
  FanOpts eval_fan;
  auto* eval = app.add_subcommand("mi-eval", "mutual information of one beam fan on a saved map");
  add_common(eval, eval_o, true, false);
  eval->add_option("--map", eval_map, "grid or octree map file")->required();
  eval->add_option("--pose", eval_pose, "x,y,z,heading")->required()->delimiter(',')->expected(4);
  add_fan_options(eval, eval_fan);

  CommonOpts surf_o;
  std::string surf_map;
  std::int32_t surf_layer = 0;
  double surf_heading = 0.0;
  FanOpts surf_fan;
  auto* surf = app.add_subcommand("mi-surface", "per-cell fan MI over one map layer, as CSV");
  add_common(surf, surf_o, true, false);
  surf->add_option("--map", surf_map, "grid or octree map file")->required();
  surf->add_option("--layer", surf_layer, "z layer")->capture_default_str();
  surf->add_option("--heading", surf_heading, "fan heading, radians")->capture_default_str();
  add_fan_options(surf, surf_fan);

  CommonOpts study_o;
  auto* study = app.add_subcommand("srle-study", "run count versus element count across resolutions");
  add_common(study, study_o);

  CommonOpts oracle_o;
  long long trials = 1000;
  double tol = 1e-10;
  std::string replay;
  auto* oracle = app.add_subcommand("oracle-check", "random agreement checks of the MI evaluators");
  add_common(oracle, oracle_o, false, true);
  oracle->add_option("--trials", trials, "instances per suite")->capture_default_str();
  oracle->add_option("--tolerance", tol, "relative tolerance")->capture_default_str();
  oracle->add_option("--replay", replay, "re-run one instance from a breach file");

  auto* map = app.add_subcommand("map", "map file utilities");
  map->require_subcommand(1);
  std::string inspect_path;
  auto* inspect = map->add_subcommand("inspect", "print map header and statistics");
  inspect->add_option("--map", inspect_path, "map file")->required();
  CommonOpts convert_o;
  std::string convert_in;
  std::optional<double> convert_res;
  auto* convert = map->add_subcommand("convert", "grid <-> octree at a resolution");
  add_common(convert, convert_o, true, false);
  convert->add_option("--in", convert_in, "input map")->required();
  convert->add_option("--resolution", convert_res, "target cell size, m");
  CommonOpts make_o;
  std::string scene;
  int epm = 1;
  auto* make = map->add_subcommand("make", "write a built-in scene");
  add_common(make, make_o);
  make->add_option("--scene", scene, "two-wall | corridor | env")->required();
  make->add_option("--elements-per-metre", epm, "corridor resolution")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*explore) return cmd_explore(explore_o);
    if (*eval) return cmd_mi_eval(eval_o, eval_map, eval_pose, eval_fan);
    if (*surf) return cmd_mi_surface(surf_o, surf_map, surf_layer, surf_heading, surf_fan);
    if (*study) return cmd_srle_study(study_o);
    if (*oracle) return cmd_oracle_check(oracle_o, trials, tol, replay);
    if (*inspect) return cmd_map_inspect(inspect_path);
    if (*convert) return cmd_map_convert(convert_o, convert_in, convert_res);
    if (*make) return cmd_map_make(make_o, scene, epm);
  } catch (const UsageError& e) {
    spdlog::error("{}", e.what());
    return kUsage;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kRuntime;
  }
  return kUsage;
}
