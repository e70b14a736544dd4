#pragma once

// Time-varying LQR along a reference trajectory.
//
// Reduced error coordinates (16): δq = vec(q ⊗ q_ref⁻¹), Δp, Δψ, Δφ and the
// eight velocity differences. The attitude chart is anchored at the
// reference, so it is valid for any reference attitude.

#include <Eigen/Dense>

#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vtauv/trajopt.hpp"
#include "vtauv/vehicle.hpp"

namespace vtauv {

inline constexpr int kReducedSize = 16;
using Vector16d = Eigen::Matrix<double, 16, 1>;
using Matrix16d = Eigen::Matrix<double, 16, 16>;
using Matrix16x3d = Eigen::Matrix<double, 16, 3>;
using Matrix3x16d = Eigen::Matrix<double, 3, 16>;

enum class AttitudeError {
  kMultiplicative,  // vec(q ⊗ q_ref⁻¹), scalar part kept non-negative
  kComponentwise,   // q_vec − q_ref,vec
};

/// Error of x relative to ref in reduced coordinates.
Vector16d reduced_error(const FullState& x, const FullState& ref,
                        AttitudeError mode = AttitudeError::kMultiplicative);

/// Inverse of the multiplicative reduced_error: the state at offset δ from
/// the anchor. Throws Error(kDomain) if |δq| > 1.
FullState apply_reduced(const FullState& anchor, const Vector16d& delta);

/// Error dynamics d/dt δ around a reference moving with (x*, u*):
/// attitude rows vec(½ q ⊗ (ω − ω*) ⊗ q*⁻¹), remaining rows f(x, u) − f(x*, u*).
/// Zero at δ = 0, û = 0.
Vector16d reduced_dynamics(const VehicleModel& model, const FullState& x_star,
                           const ControlInput& u_star, const Vector16d& delta,
                           const Eigen::Vector3d& du);

struct LinearizedSystem {
  Matrix16d a = Matrix16d::Zero();
  Matrix16x3d b = Matrix16x3d::Zero();
  FullState x_star;
  ControlInput u_star;
  double time = 0.0;  // [s]
};

/// Central finite differences of reduced_dynamics with step `step`·max(1, |·|).
/// Throws Error(kChartSingularity) if the anchor's q_w ≤ 0; flip the sign of
/// the anchor quaternion first (same rotation).
LinearizedSystem linearize(const VehicleModel& model, const FullState& x_star,
                           const ControlInput& u_star, double step = 1e-6);

struct AreSolution {
  Eigen::MatrixXd s;
  Eigen::MatrixXd k;
};

/// ‖SA + AᵀS − SBR⁻¹BᵀS + Q‖_F relative to ‖S‖_F (absolute when S = 0).
double are_residual(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const Eigen::MatrixXd& q,
                    const Eigen::MatrixXd& r, const Eigen::MatrixXd& s);

/// Stabilizing solution of the continuous-time ARE: Hamiltonian matrix-sign
/// iteration refined by Newton-Kleinman. Throws Error(kNonStabilizable) when
/// no stabilizing solution is found to relative residual 1e-8, and
/// Error(kDimensionMismatch) / Error(kInvalidSpec) for bad inputs.
AreSolution solve_are(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                      const Eigen::MatrixXd& q, const Eigen::MatrixXd& r);

struct RiccatiOptions {
  double max_step = 0.01;        // [s] RK4 step upper bound
  double blowup_ceiling = 1e12;  // ‖S‖_F above this aborts
};

using SystemMatrices = std::function<std::pair<Eigen::MatrixXd, Eigen::MatrixXd>(double t)>;

struct DreSolution {
  std::vector<double> times;
  std::vector<Eigen::MatrixXd> s;
  std::vector<Eigen::MatrixXd> k;
};

/// Integrates −Ṡ = SA + AᵀS − SBR⁻¹BᵀS + Q backward from S(grid.back()) =
/// s_terminal with RK4, symmetrizing every step; stores S and K = R⁻¹BᵀS at
/// each grid time. The grid must be increasing. Throws Error(kRiccatiBlowUp).
DreSolution integrate_dre(const std::vector<double>& grid, const SystemMatrices& system,
                          const Eigen::MatrixXd& q, const Eigen::MatrixXd& r,
                          const Eigen::MatrixXd& s_terminal, const RiccatiOptions& options = {});

struct GainSchedule {
  std::vector<double> times;       // knot times 0 … D
  std::vector<Matrix16d> s;        // empty when loaded without S
  std::vector<Matrix3x16d> k;
  Matrix16d s_inf = Matrix16d::Zero();
  Matrix3x16d k_inf = Matrix3x16d::Zero();
  Matrix16d q = Matrix16d::Identity();
  Eigen::Matrix3d r = Eigen::Matrix3d::Identity();
  std::map<std::string, std::string> metadata;

  double duration() const { return times.empty() ? 0.0 : times.back(); }
  /// Linear interpolation of K on the grid; K∞ for t > D.
  Matrix3x16d gain_at(double t) const;
};

/// Q = diag(10 on attitude, 100 on position, 1 on thruster angles and velocities).
Matrix16d DefaultStateWeight();
/// R = diag(0.01, 1, 1).
Eigen::Matrix3d DefaultInputWeight();

struct TvlqrOptions {
  Matrix16d q = DefaultStateWeight();
  Eigen::Matrix3d r = DefaultInputWeight();
  // Q_f, used as S(D) when the terminal ARE has no stabilizing solution or
  // when seed_with_are is false. Defaults to Q.
  std::optional<Matrix16d> terminal_weight;
  bool seed_with_are = true;
  RiccatiOptions riccati;
  double fd_step = 1e-6;
};

/// Linearizations at every knot k = 0 … T with anchors (x_k, u_k) at t = k h.
/// Anchor quaternions with q_w < 0 are negated first.
std::vector<LinearizedSystem> linearize_trajectory(const VehicleModel& model,
                                                   const Trajectory& reference,
                                                   double step = 1e-6);

/// Piecewise-linear interpolation of A and B between knot linearizations.
SystemMatrices interpolate_linearizations(const std::vector<LinearizedSystem>& lins);

/// Finite-horizon schedule over the knot grid with S(D) = s_terminal and the
/// given terminal pair.
GainSchedule solve_dre(const std::vector<LinearizedSystem>& lins, const Matrix16d& q,
                       const Eigen::Matrix3d& r, const Matrix16d& s_terminal,
                       const Matrix16d& s_inf, const Matrix3x16d& k_inf,
                       const RiccatiOptions& options = {});

/// Full synthesis: knot linearizations, terminal ARE at (x_T, u_T), DRE.
/// metadata["terminal"] is "are" or "fallback".
GainSchedule synthesize_gains(const VehicleModel& model, const Trajectory& reference,
                              const TvlqrOptions& options = {});

struct ControlOutput {
  ControlInput input;
  Vector16d error = Vector16d::Zero();
  bool saturated = false;
};

/// u = u*(t) − K(t) x̂ with the force clamped to the limits. For t > D the
/// final reference point and K∞ are used.
ControlOutput control(const GainSchedule& schedule, const Trajectory& reference,
                      const VehicleParams& params, const FullState& x, double t,
                      AttitudeError mode = AttitudeError::kMultiplicative);

/// Columnar text: comment block with Q, R, S∞, K∞ and metadata, then one row
/// per grid time with the row-major K (and S when include_s).
void write_gain_schedule(std::ostream& os, const GainSchedule& schedule, bool include_s = true);
GainSchedule read_gain_schedule(std::istream& is);
void save_gain_schedule(const std::string& path, const GainSchedule& schedule,
                        bool include_s = true);
GainSchedule load_gain_schedule(const std::string& path);

}  // namespace vtauv
