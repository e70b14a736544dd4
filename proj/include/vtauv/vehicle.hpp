#pragma once

// Eight-DoF model of a torpedo-shaped AUV with one vectored thruster.
//
// Generalized coordinates: s = (q_w, q_x, q_y, q_z, x, y, z, ψ, φ), where the
// quaternion maps body to world (world z points up) and (ψ, φ) are the pan
// and tilt angles of the thruster. Generalized velocities:
// v = (ω_x, ω_y, ω_z, u, v, w, ψ̇, φ̇), all body frame.
//
// Equation of motion: M v̇ + C(v) v + D(v) v + r(s) = Gᵀ(s) w(u).

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <array>
#include <utility>

#include "vtauv/mathkit.hpp"

namespace vtauv {

using Vector8d = Eigen::Matrix<double, 8, 1>;
using Vector9d = Eigen::Matrix<double, 9, 1>;
using Vector17d = Eigen::Matrix<double, 17, 1>;
using Matrix8d = Eigen::Matrix<double, 8, 8>;
using Matrix86d = Eigen::Matrix<double, 8, 6>;

inline constexpr int kStateSize = 17;
inline constexpr int kInputSize = 3;

// Indices into the 17-entry state vector.
namespace idx {
inline constexpr int kQw = 0;
inline constexpr int kQuat = 0;
inline constexpr int kPos = 4;
inline constexpr int kPsi = 7;
inline constexpr int kPhi = 8;
inline constexpr int kVel = 9;
inline constexpr int kOmega = 9;
inline constexpr int kLinVel = 12;
inline constexpr int kPsiRate = 15;
inline constexpr int kPhiRate = 16;
}  // namespace idx

struct Interval {
  double min = 0.0;
  double max = 0.0;

  bool contains(double value) const { return value >= min && value <= max; }
  double clamp(double value) const { return value < min ? min : (value > max ? max : value); }
};

/// Pan-tilt linkage: two linear actuators, each running from an anchor on
/// the hull to an anchor on the thruster housing. Anchors are relative to
/// the thruster pivot; hull anchors in body axes, housing anchors in thruster
/// axes.
struct LinkageGeometry {
  std::array<Eigen::Vector3d, 2> hull_anchor{Eigen::Vector3d(0.30, 0.15, 0.12),
                                             Eigen::Vector3d(0.30, -0.15, 0.12)};
  std::array<Eigen::Vector3d, 2> housing_anchor{Eigen::Vector3d(-0.10, 0.10, 0.05),
                                                Eigen::Vector3d(-0.10, -0.10, 0.05)};
  Interval stroke{0.30, 0.52};
};

/// Position of each input inside the thruster wrench
/// (torque-x, torque-y, torque-z, force-x, force-y, force-z).
struct WrenchMap {
  int force = 3;
  int tau_psi = 2;
  int tau_phi = 1;
};

struct VehicleParams {
  Matrix8d rigid_mass_matrix = Matrix8d::Identity();
  Matrix8d added_mass_matrix = Matrix8d::Zero();
  Matrix8d linear_damping = Matrix8d::Zero();
  Vector8d quadratic_damping = Vector8d::Zero();
  Eigen::Vector3d center_of_gravity = Eigen::Vector3d::Zero();
  Eigen::Vector3d center_of_buoyancy = Eigen::Vector3d::Zero();
  double weight_force = 0.0;  // |f_g| = |f_b| [N]
  Eigen::Vector3d thruster_offset = Eigen::Vector3d::Zero();
  Interval force_limits{-70.0, 70.0};
  Interval psi_limits{-0.5, 0.5};
  Interval phi_limits{-0.5, 0.5};
  Interval psi_rate_limits{-0.5, 0.5};
  Interval phi_rate_limits{-0.5, 0.5};
  LinkageGeometry linkage;
  WrenchMap wrench_map;
  // Gain [1/s] of the term k(1 - |q|²) q added to q̇. Vanishes on unit
  // quaternions; keeps optimizer knots near the unit sphere.
  double quaternion_stabilization = 20.0;

  Matrix8d mass_matrix() const { return rigid_mass_matrix + added_mass_matrix; }

  /// Throws Error(kInvalidSpec) on a violated parameter invariant.
  void validate() const;
};

/// Synthetic, non-physical parameter set for a 2.5 m slender hull. Mirrors
/// config/vehicle_default.json.
VehicleParams DefaultVehicleParams();

struct FullState {
  Vector9d s = Vector9d::Zero();
  Vector8d v = Vector8d::Zero();

  FullState() { s[idx::kQw] = 1.0; }
  static FullState FromVector(const Vector17d& x);
  Vector17d vector() const;

  UnitQuaternion quaternion() const { return UnitQuaternion(s.head<4>()); }
  void set_quaternion(const UnitQuaternion& q) { s.head<4>() = q.coeffs; }
  Eigen::Vector3d position() const { return s.segment<3>(4); }
  void set_position(const Eigen::Vector3d& p) { s.segment<3>(4) = p; }
  double psi() const { return s[7]; }
  double phi() const { return s[8]; }
  Eigen::Vector3d omega() const { return v.head<3>(); }
  Eigen::Vector3d linear_velocity() const { return v.segment<3>(3); }
  double psi_rate() const { return v[6]; }
  double phi_rate() const { return v[7]; }
};

struct ControlInput {
  double force = 0.0;    // [N]
  double tau_psi = 0.0;  // [N·m]
  double tau_phi = 0.0;  // [N·m]

  Eigen::Vector3d vector() const { return {force, tau_psi, tau_phi}; }
  static ControlInput FromVector(const Eigen::Vector3d& u) { return {u[0], u[1], u[2]}; }
};

/// Validated parameters plus the Cholesky factor of the total mass matrix.
/// Immutable; safe to share across threads.
class VehicleModel {
 public:
  explicit VehicleModel(VehicleParams params);

  const VehicleParams& params() const { return params_; }
  const Matrix8d& mass_matrix() const { return mass_; }
  /// Solves M a = rhs through the stored factorization.
  template <typename Rhs>
  auto solve_mass(const Eigen::MatrixBase<Rhs>& rhs) const {
    return llt_.solve(rhs);
  }

 private:
  VehicleParams params_;
  Matrix8d mass_;
  Eigen::LLT<Matrix8d> llt_;
};

Matrix8d coriolis_matrix(const VehicleParams& params, const Vector8d& v);

/// D_l v + diag(D_q,i |v_i|) v.
Vector8d damping_force(const VehicleParams& params, const Vector8d& v);

/// r(s): minus the gravity/buoyancy wrench, as it appears on the left-hand
/// side of the equation of motion. Only torque entries are non-zero.
Vector8d restoring_wrench(const VehicleParams& params, const UnitQuaternion& q);

/// 8×6 map Gᵀ from the thruster wrench to generalized forces. Force columns
/// follow the thrust direction Rz(ψ)Ry(φ) applied at the pivot; torque-y and
/// torque-z act on the φ and ψ joints with unit gain.
Matrix86d thruster_jacobian(const VehicleParams& params, const Vector9d& s);

/// Thruster wrench (torque-x, torque-y, torque-z, force-x, force-y, force-z).
Eigen::Matrix<double, 6, 1> thruster_wrench(const VehicleParams& params, const ControlInput& u);

Vector8d forward_dynamics(const VehicleModel& model, const FullState& x, const ControlInput& u);

Vector17d state_derivative(const VehicleModel& model, const FullState& x, const ControlInput& u);
Vector17d state_derivative(const VehicleModel& model, const Vector17d& x, const Eigen::Vector3d& u);
/// With an additional generalized force (body-frame wrench, joint torques).
Vector17d state_derivative(const VehicleModel& model, const Vector17d& x, const Eigen::Vector3d& u,
                           const Vector8d& external);

struct DynamicsJacobian {
  Vector17d value;
  Eigen::Matrix<double, 17, 17> dx;
  Eigen::Matrix<double, 17, 3> du;
};

/// state_derivative and its exact Jacobians (forward-mode AD).
DynamicsJacobian state_derivative_jacobian(const VehicleModel& model, const Vector17d& x,
                                           const Eigen::Vector3d& u);

/// Actuator lengths (l1, l2) [m] for thruster angles (ψ, φ). Throws
/// Error(kUnreachablePose) if either length leaves the actuator stroke.
std::pair<double, double> linkage_inverse_kinematics(const VehicleParams& params, double psi,
                                                     double phi);

/// Kinetic energy ½ vᵀ M v.
double kinetic_energy(const VehicleModel& model, const Vector8d& v);

}  // namespace vtauv
