#pragma once

// Randomised agreement checks between the MI evaluators, with JSON replay of
// any failing instance.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "ssmi/mutual_info.hpp"
#include "ssmi/sim/rng.hpp"
#include "ssmi/srle.hpp"

namespace ssmi::sim {

enum class CheckKind { DenseVsOracle, SrleVsDense };

inline std::string to_string(CheckKind k) { return k == CheckKind::DenseVsOracle ? "dense-vs-oracle" : "srle-vs-dense"; }

/// One ray: a run list with its sensor model. Dense instances have unit widths.
struct MiInstance {
  CheckKind kind = CheckKind::DenseVsOracle;
  SensorParams params;
  std::vector<LogOddsVector> beliefs;
  std::vector<LogOddsVector> priors;
  std::vector<std::uint32_t> widths;

  SrleRay ray() const {
    SrleRay r;
    for (std::size_t i = 0; i < beliefs.size(); ++i) r.runs.push_back({widths[i], beliefs[i], priors[i]});
    return r;
  }
};

struct CheckOutcome {
  double value = 0.0;      // evaluator under test
  double reference = 0.0;  // oracle or dense value
  double abs_error = 0.0;
  double rel_error = 0.0;
};

inline LogOddsVector random_logodds(Rng& rng, std::size_t k, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  LogOddsVector h(k);
  for (std::size_t j = 1; j <= k; ++j) h.set(j, u(rng));
  return h;
}

/// Random model with a random symmetric clamp range.
inline SensorParams random_params(Rng& rng, std::size_t k) {
  std::uniform_real_distribution<double> u(-2.0, 2.0), lim(2.0, 10.0);
  SensorParams p = SensorParams::make_default(k, 0.65, lim(rng));
  p.phi_plus = random_logodds(rng, k, -2.0, 2.0);
  p.phi_minus = random_logodds(rng, k, -2.0, 2.0);
  p.psi_plus = random_logodds(rng, k, 0.0, 2.0);
  p.validate();
  return p;
}

/// Belief whose free probability is exactly `pi0` (up to rounding), the rest
/// spread evenly over the classes.
inline LogOddsVector logodds_with_free_mass(std::size_t k, double pi0) {
  LogOddsVector h(k);
  const double v = std::log1p(-pi0) - std::log(pi0) - std::log(static_cast<double>(k));
  for (std::size_t j = 1; j <= k; ++j) h.set(j, v);
  return h;
}

/// Dense ray of up to 8 cells, K up to 3, beliefs inside the clamp range.
inline MiInstance random_dense_instance(Rng& rng) {
  std::uniform_int_distribution<std::size_t> kd(1, 3), nd(1, 8);
  MiInstance inst;
  const std::size_t k = kd(rng), n = nd(rng);
  inst.params = random_params(rng, k);
  const double lim = inst.params.clamp_hi[1];
  for (std::size_t i = 0; i < n; ++i) {
    inst.beliefs.push_back(random_logodds(rng, k, -lim, lim));
    inst.priors.push_back(random_logodds(rng, k, -1.0, 1.0));
    inst.widths.push_back(1);
  }
  return inst;
}

/// Run-length ray with up to 6 runs of width up to 16. About a third of the
/// runs sit at free mass 0.5 or 1 - 1e-13.
inline MiInstance random_srle_instance(Rng& rng) {
  std::uniform_int_distribution<std::size_t> kd(1, 3), qd(1, 6), special(0, 5);
  std::uniform_int_distribution<std::uint32_t> wd(1, 16);
  MiInstance inst;
  inst.kind = CheckKind::SrleVsDense;
  const std::size_t k = kd(rng), q = qd(rng);
  inst.params = random_params(rng, k);
  const double lim = inst.params.clamp_hi[1];
  const LogOddsVector prior = random_logodds(rng, k, -1.0, 1.0);
  for (std::size_t i = 0; i < q; ++i) {
    const std::size_t s = special(rng);
    if (s == 0) {
      inst.beliefs.push_back(logodds_with_free_mass(k, 0.5));
    } else if (s == 1) {
      inst.beliefs.push_back(logodds_with_free_mass(k, 1.0 - 1e-13));
    } else {
      inst.beliefs.push_back(random_logodds(rng, k, -lim, lim));
    }
    inst.priors.push_back(prior);
    inst.widths.push_back(wd(rng));
  }
  return inst;
}

inline CheckOutcome run_check(const MiInstance& inst) {
  CheckOutcome out;
  if (inst.kind == CheckKind::DenseVsOracle) {
    std::vector<RayCell> cells;
    for (std::size_t i = 0; i < inst.beliefs.size(); ++i) cells.push_back({inst.beliefs[i].values(), inst.priors[i].values()});
    out.value = beam_mi_dense(cells, inst.params).value;
    out.reference = beam_mi_oracle(cells, inst.params).hit_information;
  } else {
    const SrleRay ray = inst.ray();
    out.value = beam_mi_srle(ray, inst.params).value;
    out.reference = beam_mi_dense(expand(ray), inst.params).value;
  }
  out.abs_error = std::abs(out.value - out.reference);
  out.rel_error = out.abs_error / std::max(std::abs(out.reference), 1e-300);
  return out;
}

inline nlohmann::json to_json(const MiInstance& inst) {
  auto vec = [](const LogOddsVector& v) { return std::vector<double>(v.values().begin(), v.values().end()); };
  nlohmann::json j;
  j["kind"] = to_string(inst.kind);
  j["params"] = {{"phi_plus", vec(inst.params.phi_plus)},
                 {"phi_minus", vec(inst.params.phi_minus)},
                 {"psi_plus", vec(inst.params.psi_plus)},
                 {"clamp_lo", inst.params.clamp_lo},
                 {"clamp_hi", inst.params.clamp_hi},
                 {"alpha", inst.params.alpha}};
  nlohmann::json runs = nlohmann::json::array();
  for (std::size_t i = 0; i < inst.beliefs.size(); ++i) {
    runs.push_back({{"width", inst.widths[i]}, {"belief", vec(inst.beliefs[i])}, {"prior", vec(inst.priors[i])}});
  }
  j["runs"] = runs;
  return j;
}

inline MiInstance instance_from_json(const nlohmann::json& j) {
  try {
    MiInstance inst;
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "dense-vs-oracle") {
      inst.kind = CheckKind::DenseVsOracle;
    } else if (kind == "srle-vs-dense") {
      inst.kind = CheckKind::SrleVsDense;
    } else {
      throw FormatError("unknown check kind '" + kind + "'");
    }
    const auto& p = j.at("params");
    auto lov = [](const nlohmann::json& v) { return LogOddsVector::from_values(v.get<std::vector<double>>()); };
    inst.params = SensorParams{lov(p.at("phi_plus")), lov(p.at("phi_minus")), lov(p.at("psi_plus")),
                               p.at("clamp_lo").get<std::vector<double>>(),
                               p.at("clamp_hi").get<std::vector<double>>(), p.at("alpha").get<double>()};
    inst.params.validate();
    for (const auto& r : j.at("runs")) {
      inst.widths.push_back(r.at("width").get<std::uint32_t>());
      inst.beliefs.push_back(lov(r.at("belief")));
      inst.priors.push_back(lov(r.at("prior")));
    }
    return inst;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("replay file: ") + e.what());
  }
}

}  // namespace ssmi::sim
