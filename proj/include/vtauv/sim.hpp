#pragma once

// Fixed-step simulation of the vehicle, open loop or under the time-varying
// LQR. Control runs on a coarser grid than the integrator (zero-order hold).

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "vtauv/trajopt.hpp"
#include "vtauv/tvlqr.hpp"
#include "vtauv/vehicle.hpp"

namespace vtauv {

/// Multipliers applied to the plant's hydrodynamic parameters; the
/// controller keeps the nominal model.
struct ParameterScaling {
  double damping = 1.0;     // D_l and D_q
  double added_mass = 1.0;  // M_AM
};

struct SimConfig {
  double integrator_step = 0.002;  // [s]
  double control_period = 0.02;    // [s], a whole multiple of integrator_step
  double duration = 0.0;           // [s]; 0 runs for the trajectory duration
  // Constant generalized force on the plant: body wrench (torque-x … force-z)
  // then the two joint torques.
  Vector8d bias_force = Vector8d::Zero();
  // Offset of the initial state from x_0, in reduced error coordinates.
  Vector16d initial_perturbation = Vector16d::Zero();
  // Additional uniform random offset: fraction of state_envelope() per
  // coordinate, drawn from `seed`.
  double random_perturbation = 0.0;
  std::uint64_t seed = 0;
  ParameterScaling scaling;
  AttitudeError attitude_error = AttitudeError::kMultiplicative;

  /// Throws Error(kInvalidSpec).
  void validate(double trajectory_duration) const;
  double effective_duration(double trajectory_duration) const {
    return duration > 0.0 ? duration : trajectory_duration;
  }
};

/// Per-coordinate scale of the reduced state used for random perturbations:
/// the range covered by the reference (attitude relative to x_0), floored at
/// 0.1 for attitude, 1 m for position, 0.5 for velocities; the full limit
/// span for thruster angles.
Vector16d state_envelope(const Trajectory& reference, const VehicleParams& params);

/// Initial state of a rollout: x_0 of the reference offset per `config`, then
/// clamped to the thruster angle and rate limits.
FullState perturbed_initial_state(const Trajectory& reference, const VehicleParams& params,
                                  const SimConfig& config);

/// One RK4 step with zero-order-hold input, then quaternion renormalization
/// and thruster stops (angle clamped, rate zeroed; rates clamped to their
/// limits). Sets *clamped when a stop or rate limit was hit. Throws
/// Error(kNonFinite).
FullState step(const VehicleModel& model, const FullState& x, const ControlInput& u, double dt,
               const Vector8d& external = Vector8d::Zero(), bool* clamped = nullptr);

struct SimLog {
  std::vector<double> times;
  std::vector<Vector17d> states;
  std::vector<Eigen::Vector3d> inputs;  // applied, after clamping
  std::vector<Vector17d> reference_states;
  std::vector<Eigen::Vector3d> reference_inputs;
  std::vector<Vector16d> errors;
  std::vector<int> saturated;  // 1 when any clamp was active over the sample
  std::map<std::string, std::string> metadata;

  size_t size() const { return times.size(); }
};

/// Applies u*(t) from the perturbed initial state; the input is sampled at
/// every integrator step.
SimLog rollout_open_loop(const VehicleParams& params, const Trajectory& traj,
                         const SimConfig& config);

/// Applies tvlqr::control every control period.
SimLog rollout_closed_loop(const VehicleParams& params, const Trajectory& traj,
                           const GainSchedule& schedule, const SimConfig& config);

struct TrackingMetrics {
  double rms_position_error = 0.0;    // [m]
  double final_position_error = 0.0;  // [m]
  double max_attitude_error = 0.0;    // [rad], geodesic
  double final_error_norm = 0.0;      // ‖reduced error‖ at the last sample
  double saturation_fraction = 0.0;
  size_t samples = 0;
};

/// Throws Error(kInvalidSpec) on an empty log.
TrackingMetrics tracking_metrics(const SimLog& log);
nlohmann::json metrics_json(const TrackingMetrics& metrics);

/// Columnar text: time, state, applied input, reference state and input,
/// reduced error, saturation flag.
void write_sim_log(std::ostream& os, const SimLog& log);
SimLog read_sim_log(std::istream& is);
void save_sim_log(const std::string& path, const SimLog& log);
SimLog load_sim_log(const std::string& path);

}  // namespace vtauv
