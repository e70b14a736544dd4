#include "vtauv/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "vtauv/config.hpp"
#include "vtauv/errors.hpp"

namespace vtauv {

using nlohmann::json;
using namespace config_detail;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

[[noreturn]] void BadConfig(const std::string& what, const std::string& detail) {
  throw Error(ErrorCode::kConfig, what + ": " + detail);
}

void RequireObject(const json& j, const std::string& what) {
  if (!j.is_object()) BadConfig(what, "expected an object");
}

bool GetBool(const json& j, const std::string& what) {
  if (!j.is_boolean()) BadConfig(what, "expected true or false, got " + j.dump());
  return j.get<bool>();
}

std::string GetString(const json& j, const std::string& what) {
  if (!j.is_string()) BadConfig(what, "expected a string, got " + j.dump());
  return j.get<std::string>();
}

std::uint64_t GetSeed(const json& j, const std::string& what) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<std::int64_t>() >= 0)) {
    BadConfig(what, "expected a non-negative integer");
  }
  return j.get<std::uint64_t>();
}

template <int N>
Eigen::Matrix<double, N, N> Diagonal(const json& j, const std::string& what) {
  return get_vector<N>(j, what).asDiagonal();
}

template <int N>
json DiagonalJson(const Eigen::Matrix<double, N, N>& m) {
  return vector_json(Eigen::Matrix<double, N, 1>(m.diagonal()));
}

UnitQuaternion FromDegrees(const json& j, const std::string& what) {
  const Eigen::Vector3d ypr = get_vector<3>(j, what) * kDeg;
  return UnitQuaternion::FromYawPitchRoll(ypr[0], ypr[1], ypr[2]);
}

void ApplyTvlqr(const json& j, TvlqrOptions& o, const std::string& what) {
  RequireObject(j, what);
  for (const auto& [key, value] : j.items()) {
    const std::string w = what + "." + key;
    if (key == "state_weight") {
      o.q = Diagonal<16>(value, w);
    } else if (key == "input_weight") {
      o.r = Diagonal<3>(value, w);
    } else if (key == "terminal_weight") {
      if (value.is_null()) {
        o.terminal_weight.reset();
      } else {
        o.terminal_weight = Diagonal<16>(value, w);
      }
    } else if (key == "seed_with_are") {
      o.seed_with_are = GetBool(value, w);
    } else if (key == "max_step") {
      o.riccati.max_step = get_double(value, w);
    } else {
      BadConfig(w, "unknown key");
    }
  }
}

void ApplySim(const json& j, ScenarioSpec& spec, const std::string& what) {
  RequireObject(j, what);
  SimConfig& c = spec.sim;
  for (const auto& [key, value] : j.items()) {
    const std::string w = what + "." + key;
    if (key == "integrator_step") {
      c.integrator_step = get_double(value, w);
    } else if (key == "control_period") {
      c.control_period = get_double(value, w);
    } else if (key == "duration") {
      c.duration = get_double(value, w);
    } else if (key == "bias_force") {
      c.bias_force = get_vector<8>(value, w);
    } else if (key == "initial_perturbation") {
      c.initial_perturbation = get_vector<16>(value, w);
    } else if (key == "perturbation") {
      spec.perturbation = get_double(value, w);
    } else if (key == "seed") {
      c.seed = GetSeed(value, w);
    } else if (key == "damping_scale") {
      c.scaling.damping = get_double(value, w);
    } else if (key == "added_mass_scale") {
      c.scaling.added_mass = get_double(value, w);
    } else {
      BadConfig(w, "unknown key");
    }
  }
}

}  // namespace

// Builtins ------------------------------------------------------------------

ScenarioSpec PoleBalancingScenario() {
  ScenarioSpec s;
  s.name = "polebalancing";
  s.description = "level start, pitch up to a vertical nose-up attitude and hold it";
  TranscriptionSpec& t = s.transcription;
  t.knots = 30;
  t.time_step = {0.05, 0.5};
  t.target.set_quaternion(UnitQuaternion::FromYawPitchRoll(0.0, -std::numbers::pi / 2, 0.0));
  // Position only enters the running cost.
  t.target.set_position({0.0, 0.0, 2.0});
  t.final_position = false;
  t.final_thruster_angles = false;
  t.hold_knots = 5;
  // Holding the vertical pose at rest needs more thrust than the vehicle limit.
  t.force_limits = Interval{-140.0, 140.0};
  return s;
}

ScenarioSpec QuarterhelixScenario() {
  ScenarioSpec s;
  s.name = "quarterhelix";
  s.description = "cruise along a rising curve with a total yaw change of 90 degrees";
  TranscriptionSpec& t = s.transcription;
  t.knots = 30;
  t.time_step = {0.05, 1.0};
  t.initial.v[3] = 0.5;
  t.target.set_quaternion(UnitQuaternion::FromYawPitchRoll(std::numbers::pi / 2, 0.0, 0.0));
  t.target.set_position({4.0, 4.0, 1.0});
  t.target.v[3] = 0.5;
  t.initial_acceleration = Vector8d::Zero();
  t.final_acceleration = Vector8d::Zero();
  return s;
}

ScenarioSpec SteepElevationScenario() {
  ScenarioSpec s;
  s.name = "steep-elevation";
  s.description = "climb straight up between level attitudes inside a narrow x-y box";
  TranscriptionSpec& t = s.transcription;
  t.knots = 30;
  t.time_step = {0.05, 0.5};
  t.target.set_position({0.0, 0.0, 3.0});
  // A rest endpoint would force z_T = z_{T-1} under implicit Euler.
  t.final_velocity = false;
  t.lateral_limits = Interval{-1.0, 1.0};
  t.min_climb = 0.01;
  t.guess_attitude = UnitQuaternion::FromYawPitchRoll(0.0, -45.0 * kDeg, 0.0);
  t.guess_force = 20.0;
  return s;
}

void ScenarioSpec::validate(const VehicleParams& params) const {
  if (name.empty()) throw Error(ErrorCode::kInvalidSpec, "scenario name is empty");
  try {
    transcription.validate(params);
    sim.validate(0.0);
  } catch (const Error& e) {
    throw Error(e.code(), "scenario " + name + ": " + e.what());
  }
  if (!std::isfinite(perturbation) || perturbation < 0.0) {
    throw Error(ErrorCode::kInvalidSpec, "scenario " + name + ": perturbation must be >= 0");
  }
  const bool q_ok = tvlqr.q.allFinite() && (tvlqr.q.diagonal().array() >= 0.0).all();
  const bool r_ok = tvlqr.r.allFinite() && (tvlqr.r.diagonal().array() > 0.0).all();
  if (!q_ok || !r_ok) {
    throw Error(ErrorCode::kInvalidSpec,
                "scenario " + name + ": Q must be >= 0 and R > 0 on the diagonal");
  }
}

// Registry ------------------------------------------------------------------

ScenarioRegistry ScenarioRegistry::WithBuiltins() {
  ScenarioRegistry r;
  r.add(PoleBalancingScenario());
  r.add(QuarterhelixScenario());
  r.add(SteepElevationScenario());
  return r;
}

void ScenarioRegistry::add(ScenarioSpec spec) {
  if (spec.name.empty()) throw Error(ErrorCode::kInvalidSpec, "scenario name is empty");
  if (contains(spec.name)) {
    throw Error(ErrorCode::kDuplicateScenario, "scenario '" + spec.name + "' already exists");
  }
  scenarios_.push_back(std::move(spec));
}

bool ScenarioRegistry::contains(const std::string& name) const {
  return std::any_of(scenarios_.begin(), scenarios_.end(),
                     [&](const ScenarioSpec& s) { return s.name == name; });
}

const ScenarioSpec& ScenarioRegistry::get(const std::string& name) const {
  for (const ScenarioSpec& s : scenarios_) {
    if (s.name == name) return s;
  }
  throw Error(ErrorCode::kUnknownScenario, "unknown scenario '" + name + "'");
}

ScenarioSpec& ScenarioRegistry::get(const std::string& name) {
  return const_cast<ScenarioSpec&>(std::as_const(*this).get(name));
}

void ScenarioRegistry::self_check(const VehicleParams& params) const {
  for (const ScenarioSpec& s : scenarios_) s.validate(params);
}

// JSON ----------------------------------------------------------------------

json state_to_json(const FullState& x) {
  json j;
  j["quaternion"] = vector_json(x.quaternion().coeffs);
  j["position"] = vector_json(x.position());
  j["thruster_angles"] = json::array({x.psi(), x.phi()});
  j["angular_velocity"] = vector_json(x.omega());
  j["linear_velocity"] = vector_json(x.linear_velocity());
  j["thruster_rates"] = json::array({x.psi_rate(), x.phi_rate()});
  return j;
}

FullState state_from_json(const json& j, const FullState& base, const std::string& what) {
  RequireObject(j, what);
  if (j.contains("quaternion") && j.contains("yaw_pitch_roll_deg")) {
    BadConfig(what, "give either quaternion or yaw_pitch_roll_deg");
  }
  FullState x = base;
  for (const auto& [key, value] : j.items()) {
    const std::string w = what + "." + key;
    if (key == "quaternion") {
      x.set_quaternion(UnitQuaternion(get_vector<4>(value, w)));
    } else if (key == "yaw_pitch_roll_deg") {
      x.set_quaternion(FromDegrees(value, w));
    } else if (key == "position") {
      x.set_position(get_vector<3>(value, w));
    } else if (key == "thruster_angles") {
      x.s.segment<2>(idx::kPsi) = get_vector<2>(value, w);
    } else if (key == "angular_velocity") {
      x.v.head<3>() = get_vector<3>(value, w);
    } else if (key == "linear_velocity") {
      x.v.segment<3>(3) = get_vector<3>(value, w);
    } else if (key == "thruster_rates") {
      x.v.tail<2>() = get_vector<2>(value, w);
    } else {
      BadConfig(w, "unknown key");
    }
  }
  return x;
}

json scenario_to_json(const ScenarioSpec& spec) {
  const TranscriptionSpec& t = spec.transcription;
  json j;
  j["name"] = spec.name;
  j["description"] = spec.description;
  j["knots"] = t.knots;
  j["time_step"] = interval_json(t.time_step);
  j["initial"] = state_to_json(t.initial);
  j["target"] = state_to_json(t.target);
  j["initial_acceleration"] =
      t.initial_acceleration ? vector_json(*t.initial_acceleration) : json(nullptr);
  j["final_acceleration"] =
      t.final_acceleration ? vector_json(*t.final_acceleration) : json(nullptr);
  j["final_position"] = t.final_position;
  j["final_attitude"] = t.final_attitude;
  j["final_thruster_angles"] = t.final_thruster_angles;
  j["final_velocity"] = t.final_velocity;
  j["hold_knots"] = t.hold_knots;
  j["force_limits"] = t.force_limits ? interval_json(*t.force_limits) : json(nullptr);
  j["lateral_limits"] = t.lateral_limits ? interval_json(*t.lateral_limits) : json(nullptr);
  j["min_climb"] = t.min_climb ? json(*t.min_climb) : json(nullptr);
  j["weights"] = {{"position", t.weights.position},
                  {"input", t.weights.input},
                  {"duration", t.weights.duration}};
  j["guess_attitude"] =
      t.guess_attitude ? vector_json(t.guess_attitude->coeffs) : json(nullptr);
  j["guess_force"] = t.guess_force;
  j["tvlqr"] = {
      {"state_weight", DiagonalJson<16>(spec.tvlqr.q)},
      {"input_weight", DiagonalJson<3>(spec.tvlqr.r)},
      {"terminal_weight",
       spec.tvlqr.terminal_weight ? DiagonalJson<16>(*spec.tvlqr.terminal_weight) : json(nullptr)},
      {"seed_with_are", spec.tvlqr.seed_with_are},
      {"max_step", spec.tvlqr.riccati.max_step}};
  const SimConfig& c = spec.sim;
  j["sim"] = {{"integrator_step", c.integrator_step},
              {"control_period", c.control_period},
              {"duration", c.duration},
              {"bias_force", vector_json(c.bias_force)},
              {"initial_perturbation", vector_json(c.initial_perturbation)},
              {"perturbation", spec.perturbation},
              {"seed", c.seed},
              {"damping_scale", c.scaling.damping},
              {"added_mass_scale", c.scaling.added_mass}};
  return j;
}

ScenarioSpec apply_scenario_json(const json& j, ScenarioSpec base) {
  const std::string what =
      "scenario " + (j.is_object() && j.contains("name") && j["name"].is_string()
                         ? j["name"].get<std::string>()
                         : base.name);
  RequireObject(j, what);
  ScenarioSpec s = std::move(base);
  TranscriptionSpec& t = s.transcription;
  for (const auto& [key, value] : j.items()) {
    const std::string w = what + "." + key;
    if (key == "base") {
      continue;  // consumed by the caller
    } else if (key == "name") {
      s.name = GetString(value, w);
    } else if (key == "description") {
      s.description = GetString(value, w);
    } else if (key == "knots") {
      t.knots = get_int(value, w);
    } else if (key == "time_step") {
      t.time_step = get_interval(value, w);
    } else if (key == "initial") {
      t.initial = state_from_json(value, t.initial, w);
    } else if (key == "target") {
      t.target = state_from_json(value, t.target, w);
    } else if (key == "initial_acceleration" || key == "final_acceleration") {
      auto& slot = key == "initial_acceleration" ? t.initial_acceleration : t.final_acceleration;
      if (value.is_null()) {
        slot.reset();
      } else {
        slot = get_vector<8>(value, w);
      }
    } else if (key == "final_position") {
      t.final_position = GetBool(value, w);
    } else if (key == "final_attitude") {
      t.final_attitude = GetBool(value, w);
    } else if (key == "final_thruster_angles") {
      t.final_thruster_angles = GetBool(value, w);
    } else if (key == "final_velocity") {
      t.final_velocity = GetBool(value, w);
    } else if (key == "hold_knots") {
      t.hold_knots = get_int(value, w);
    } else if (key == "force_limits" || key == "lateral_limits") {
      auto& slot = key == "force_limits" ? t.force_limits : t.lateral_limits;
      if (value.is_null()) {
        slot.reset();
      } else {
        slot = get_interval(value, w);
      }
    } else if (key == "min_climb") {
      if (value.is_null()) {
        t.min_climb.reset();
      } else {
        t.min_climb = get_double(value, w);
      }
    } else if (key == "weights") {
      RequireObject(value, w);
      for (const auto& [wk, wv] : value.items()) {
        const std::string ww = w + "." + wk;
        if (wk == "position") {
          t.weights.position = get_double(wv, ww);
        } else if (wk == "input") {
          t.weights.input = get_double(wv, ww);
        } else if (wk == "duration") {
          t.weights.duration = get_double(wv, ww);
        } else {
          BadConfig(ww, "unknown key");
        }
      }
    } else if (key == "guess_attitude") {
      if (value.is_null()) {
        t.guess_attitude.reset();
      } else {
        t.guess_attitude = UnitQuaternion(get_vector<4>(value, w));
      }
    } else if (key == "guess_attitude_deg") {
      if (value.is_null()) {
        t.guess_attitude.reset();
      } else {
        t.guess_attitude = FromDegrees(value, w);
      }
    } else if (key == "guess_force") {
      t.guess_force = get_double(value, w);
    } else if (key == "tvlqr") {
      ApplyTvlqr(value, s.tvlqr, w);
    } else if (key == "sim") {
      ApplySim(value, s, w);
    } else {
      BadConfig(w, "unknown key");
    }
  }
  return s;
}

// Run config ----------------------------------------------------------------

json solver_options_to_json(const TrajoptOptions& options) {
  const nlp::SolveOptions& o = options.solver;
  return {{"feasibility_tolerance", o.feasibility_tolerance},
          {"optimality_tolerance", o.optimality_tolerance},
          {"max_outer_iterations", o.max_outer_iterations},
          {"max_inner_iterations", o.max_inner_iterations},
          {"initial_penalty", o.initial_penalty},
          {"max_penalty", o.max_penalty}};
}

ScenarioSpec RunConfig::resolve(const std::string& name) const {
  ScenarioSpec s = registry.get(name);
  if (!tvlqr.empty()) s = apply_scenario_json(json{{"tvlqr", tvlqr}}, std::move(s));
  if (!sim.empty()) s = apply_scenario_json(json{{"sim", sim}}, std::move(s));
  if (overrides.contains(name)) {
    const json& o = overrides.at(name);
    if (o.contains("name") || o.contains("base")) {
      BadConfig("overrides." + name, "name and base cannot be overridden");
    }
    s = apply_scenario_json(o, std::move(s));
  }
  s.validate(vehicle);
  return s;
}

RunConfig run_config_from_json(const json& j) {
  require_schema_version(j);
  RunConfig rc;
  // Shared layers first so that user scenarios can be checked afterwards.
  for (const auto& [key, value] : j.items()) {
    const std::string w = "config." + key;
    if (key == "schema_version" || key == "description" || key == "scenarios") {
      continue;
    } else if (key == "vehicle") {
      rc.vehicle = vehicle_params_from_json(value);
    } else if (key == "solver") {
      RequireObject(value, w);
      nlp::SolveOptions& o = rc.solver.solver;
      for (const auto& [sk, sv] : value.items()) {
        const std::string sw = w + "." + sk;
        if (sk == "feasibility_tolerance") {
          o.feasibility_tolerance = get_double(sv, sw);
        } else if (sk == "optimality_tolerance") {
          o.optimality_tolerance = get_double(sv, sw);
        } else if (sk == "max_outer_iterations") {
          o.max_outer_iterations = get_int(sv, sw);
        } else if (sk == "max_inner_iterations") {
          o.max_inner_iterations = get_int(sv, sw);
        } else if (sk == "initial_penalty") {
          o.initial_penalty = get_double(sv, sw);
        } else if (sk == "max_penalty") {
          o.max_penalty = get_double(sv, sw);
        } else {
          BadConfig(sw, "unknown key");
        }
      }
    } else if (key == "tvlqr") {
      RequireObject(value, w);
      rc.tvlqr = value;
    } else if (key == "sim") {
      RequireObject(value, w);
      rc.sim = value;
    } else if (key == "overrides") {
      RequireObject(value, w);
      rc.overrides = value;
    } else {
      BadConfig(w, "unknown key");
    }
  }
  if (j.contains("scenarios")) {
    const json& list = j.at("scenarios");
    if (!list.is_array()) BadConfig("config.scenarios", "expected an array");
    for (const json& entry : list) {
      RequireObject(entry, "config.scenarios[]");
      if (!entry.contains("name")) BadConfig("config.scenarios[]", "missing name");
      ScenarioSpec base;
      if (entry.contains("base")) {
        base = rc.registry.get(GetString(entry.at("base"), "config.scenarios[].base"));
        base.description.clear();
      }
      rc.registry.add(apply_scenario_json(entry, std::move(base)));
    }
  }
  for (const auto& [name, value] : rc.overrides.items()) {
    if (!rc.registry.contains(name)) {
      throw Error(ErrorCode::kUnknownScenario, "overrides name unknown scenario '" + name + "'");
    }
    RequireObject(value, "overrides." + name);
  }
  // Startup self-check of every entry with all layers applied.
  for (const ScenarioSpec& s : rc.registry.scenarios()) rc.resolve(s.name);
  return rc;
}

RunConfig load_run_config(const std::string& path) {
  return run_config_from_json(read_json_file(path));
}

}  // namespace vtauv
