#pragma once

// Direct transcription of the maneuver-planning problem.
//
// Decision vector z = (x_0 … x_{T+1}, u_0 … u_T, h): T+2 knot states, T+1
// inputs and one shared time step. Dynamics are imposed as implicit-Euler
// defects x_{k+1} − x_k − h f(x_{k+1}, u_k) = 0 for k = 0 … T. The input u_k
// therefore acts on the interval [k h, (k+1) h).

#include <Eigen/Dense>

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vtauv/nlp.hpp"
#include "vtauv/vehicle.hpp"

namespace vtauv {

struct CostWeights {
  double position = 1.0;  // w_p [1/m²]
  double input = 0.01;    // w_u
  double duration = 0.1;  // w_T [1/s²]
};

struct TranscriptionSpec {
  int knots = 40;  // T
  Interval time_step{0.05, 0.5};  // [h_min, h_max] [s]
  FullState initial;
  FullState target;
  // Endpoint accelerations v̇(x_0, u_0) and v̇(x_T, u_T); free when empty.
  std::optional<Vector8d> initial_acceleration;
  std::optional<Vector8d> final_acceleration;
  // Which parts of `target` are imposed at knot T. Attitude is matched up to
  // scale since implicit Euler does not keep |q| exactly 1.
  bool final_position = true;
  bool final_attitude = true;
  bool final_thruster_angles = true;
  bool final_velocity = true;
  // Number of knots before T whose attitude must also equal the target.
  int hold_knots = 0;
  std::optional<Interval> force_limits;  // overrides VehicleParams::force_limits
  // Optional box on (x, y) positions at every knot.
  std::optional<Interval> lateral_limits;
  // When set, z_{k+1} − z_k ≥ value for k = 0 … T−1.
  std::optional<double> min_climb;
  CostWeights weights;
  // Initial-guess shaping. The default guess (slerp between the boundary
  // attitudes, zero input) is a stationary point of problems that are
  // symmetric about it, such as a straight climb between level attitudes.
  std::optional<UnitQuaternion> guess_attitude;  // passed through at mid-horizon
  double guess_force = 0.0;                      // [N] on every guess knot

  /// Throws Error(kInvalidSpec) if the spec or its boundary states violate
  /// an invariant (including the vehicle's angle and rate limits).
  void validate(const VehicleParams& params) const;
  Interval effective_force_limits(const VehicleParams& params) const {
    return force_limits.value_or(params.force_limits);
  }
};

struct Trajectory {
  std::vector<Vector17d> states;         // x_0 … x_{T+1}
  std::vector<Eigen::Vector3d> inputs;   // u_0 … u_T
  double time_step = 0.0;                // h [s]
  std::map<std::string, std::string> metadata;

  int knots() const { return static_cast<int>(inputs.size()) - 1; }
  double duration() const { return knots() * time_step; }
  double time(int k) const { return k * time_step; }
  /// Reference state at time t: linear interpolation between knots (nlerp on
  /// the quaternion), clamped to [0, D].
  FullState state_at(double t) const;
  /// Zero-order hold: u_k on [t_k, t_{k+1}); u_T for t ≥ D.
  ControlInput input_at(double t) const;
};

/// Layout helpers for the decision vector.
struct DecisionLayout {
  int knots = 0;
  int num_variables() const { return 17 * (knots + 2) + 3 * (knots + 1) + 1; }
  int state(int k) const { return 17 * k; }
  int input(int k) const { return 17 * (knots + 2) + 3 * k; }
  int time_step() const { return num_variables() - 1; }
};

Eigen::VectorXd pack(const Trajectory& traj);
Trajectory unpack(const Eigen::VectorXd& z, int knots);

nlp::NlpProblem build_transcription(const TranscriptionSpec& spec, const VehicleParams& params);

/// Slerp/linear interpolation between the boundaries, zero inputs, h at the
/// midpoint of its bounds.
Eigen::VectorXd initial_guess(const TranscriptionSpec& spec);

/// Objective terms evaluated independently of the transcription.
struct CostBreakdown {
  double position = 0.0;
  double input = 0.0;
  double duration = 0.0;
  double total() const { return position + input + duration; }
};
CostBreakdown evaluate_cost(const Trajectory& traj, const TranscriptionSpec& spec);

/// Worst violation per constraint family, recomputed from scratch.
struct ViolationReport {
  std::vector<std::pair<std::string, double>> families;
  double get(const std::string& name) const;
  double max() const;
};

/// Checks limits, quaternion norms and the dynamics defects. With a spec the
/// boundary conditions, hold segment and optional bounds are checked too.
ViolationReport validate_trajectory(const Trajectory& traj, const VehicleParams& params,
                                    const TranscriptionSpec* spec = nullptr);

struct TrajoptOptions {
  nlp::SolveOptions solver;
};

struct TrajectoryResult {
  Trajectory trajectory;
  nlp::SolveReport report;
  ViolationReport validation;
  // Solver converged and every validated family is within tolerance.
  bool converged = false;
};

TrajectoryResult solve_trajectory(const TranscriptionSpec& spec, const VehicleParams& params,
                                  const TrajoptOptions& options = {});

/// Columnar text: comment block with h and metadata, header row with units,
/// one row per knot (inputs of the trailing knot are written as nan).
void write_trajectory(std::ostream& os, const Trajectory& traj);
Trajectory read_trajectory(std::istream& is);
void save_trajectory(const std::string& path, const Trajectory& traj);
Trajectory load_trajectory(const std::string& path);

}  // namespace vtauv
