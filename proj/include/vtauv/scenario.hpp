#pragma once

// Named maneuvers and the run configuration that layers on top of them.
//
// Run config (JSON, schema_version 1):
//   vehicle     vehicle parameters, see config.hpp
//   solver      { feasibility_tolerance, optimality_tolerance, max_outer_iterations,
//                 max_inner_iterations, initial_penalty, max_penalty }
//   tvlqr       applied to every scenario, same keys as a scenario's "tvlqr"
//   sim         applied to every scenario, same keys as a scenario's "sim"
//   scenarios   array of user scenarios; "base" names a registered scenario
//               to start from, otherwise the defaults of TranscriptionSpec
//   overrides   { name: partial scenario } applied last
//
// Scenario keys: name, description, base, knots, time_step, initial, target,
// initial_acceleration, final_acceleration (8 numbers or null), final_position,
// final_attitude, final_thruster_angles, final_velocity (bool), hold_knots,
// force_limits, lateral_limits (pair or null), min_climb (number or null),
// weights { position, input, duration }, guess_attitude_deg (yaw, pitch, roll
// or null), guess_force, tvlqr { state_weight (16), input_weight (3),
// terminal_weight (16 or null), seed_with_are, max_step }, sim {
// integrator_step, control_period, duration, bias_force (8), perturbation,
// seed, damping_scale, added_mass_scale }.
// States: position, yaw_pitch_roll_deg, thruster_angles, angular_velocity,
// linear_velocity, thruster_rates; absent entries keep the base value.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "vtauv/sim.hpp"
#include "vtauv/trajopt.hpp"
#include "vtauv/tvlqr.hpp"
#include "vtauv/vehicle.hpp"

namespace vtauv {

struct ScenarioSpec {
  std::string name;
  std::string description;
  TranscriptionSpec transcription;
  TvlqrOptions tvlqr;
  // Nominal rollouts use `sim` as is; the perturbed pair additionally draws
  // a uniform offset of `perturbation` × state envelope from sim.seed.
  SimConfig sim;
  double perturbation = 0.05;

  /// Throws Error(kInvalidSpec).
  void validate(const VehicleParams& params) const;
};

ScenarioSpec PoleBalancingScenario();
ScenarioSpec QuarterhelixScenario();
ScenarioSpec SteepElevationScenario();

class ScenarioRegistry {
 public:
  /// The three built-in maneuvers.
  static ScenarioRegistry WithBuiltins();

  /// Throws Error(kDuplicateScenario) if the name is taken and
  /// Error(kInvalidSpec) for an empty name.
  void add(ScenarioSpec spec);
  /// Throws Error(kUnknownScenario).
  const ScenarioSpec& get(const std::string& name) const;
  ScenarioSpec& get(const std::string& name);
  bool contains(const std::string& name) const;
  /// Registration order.
  const std::vector<ScenarioSpec>& scenarios() const { return scenarios_; }
  /// Validates every entry against `params`.
  void self_check(const VehicleParams& params) const;

 private:
  std::vector<ScenarioSpec> scenarios_;
};

nlohmann::json state_to_json(const FullState& x);
FullState state_from_json(const nlohmann::json& j, const FullState& base,
                          const std::string& what);

nlohmann::json scenario_to_json(const ScenarioSpec& spec);
/// Applies the keys of `j` on top of `base`. Throws Error(kConfig).
ScenarioSpec apply_scenario_json(const nlohmann::json& j, ScenarioSpec base);

struct RunConfig {
  VehicleParams vehicle = DefaultVehicleParams();
  TrajoptOptions solver;
  ScenarioRegistry registry = ScenarioRegistry::WithBuiltins();
  nlohmann::json tvlqr = nlohmann::json::object();  // shared layer
  nlohmann::json sim = nlohmann::json::object();    // shared layer
  nlohmann::json overrides = nlohmann::json::object();

  /// The registered scenario with the shared layers and its override applied.
  /// Throws Error(kUnknownScenario), Error(kConfig) or Error(kInvalidSpec).
  ScenarioSpec resolve(const std::string& name) const;
};

/// Throws Error(kConfig), Error(kDuplicateScenario) or Error(kInvalidSpec).
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);

nlohmann::json solver_options_to_json(const TrajoptOptions& options);

}  // namespace vtauv
