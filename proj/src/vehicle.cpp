#include "vtauv/vehicle.hpp"

#include <unsupported/Eigen/AutoDiff>

#include <cmath>
#include <numbers>
#include <sstream>

#include "dynamics_impl.hpp"
#include "vtauv/errors.hpp"

namespace vtauv {
namespace {

void Require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::kInvalidSpec, "vehicle parameters: " + what);
}

bool ContainsZero(const Interval& i) { return i.min <= 0.0 && i.max >= 0.0; }

}  // namespace

void VehicleParams::validate() const {
  const Matrix8d m = mass_matrix();
  Require(m.allFinite(), "mass matrix has non-finite entries");
  Require((m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-9 * (1.0 + m.cwiseAbs().maxCoeff()),
          "mass matrix is not symmetric");
  Require(linear_damping.allFinite() && quadratic_damping.allFinite(),
          "damping has non-finite entries");
  Require(weight_force >= 0.0 && std::isfinite(weight_force), "weight force must be >= 0");
  Require(force_limits.min < 0.0 && force_limits.max > 0.0, "force limits must bracket zero");
  Require(ContainsZero(psi_limits) && ContainsZero(phi_limits),
          "thruster angle limits must contain zero");
  Require(ContainsZero(psi_rate_limits) && ContainsZero(phi_rate_limits),
          "thruster rate limits must contain zero");
  Require(quaternion_stabilization >= 0.0, "quaternion stabilization gain must be >= 0");
  const std::array<int, 3> slots{wrench_map.force, wrench_map.tau_psi, wrench_map.tau_phi};
  for (int slot : slots) Require(slot >= 0 && slot < 6, "wrench map slot out of range");
  Require(slots[0] != slots[1] && slots[0] != slots[2] && slots[1] != slots[2],
          "wrench map slots must be distinct");
  Require(linkage.stroke.min > 0.0 && linkage.stroke.min < linkage.stroke.max,
          "linkage stroke must be a positive interval");
}

VehicleParams DefaultVehicleParams() {
  VehicleParams p;
  Vector8d rigid;
  rigid << 2.0, 35.0, 35.0, 80.0, 80.0, 80.0, 1.0, 1.0;
  p.rigid_mass_matrix = rigid.asDiagonal();
  Vector8d added;
  added << 0.2, 25.0, 25.0, 6.0, 75.0, 75.0, 0.0, 0.0;
  p.added_mass_matrix = added.asDiagonal();
  Vector8d lin;
  lin << 1.0, 15.0, 15.0, 4.0, 40.0, 40.0, 2.0, 2.0;
  p.linear_damping = lin.asDiagonal();
  p.quadratic_damping << 0.5, 25.0, 25.0, 12.0, 150.0, 150.0, 0.0, 0.0;
  p.center_of_gravity = Eigen::Vector3d::Zero();
  p.center_of_buoyancy = Eigen::Vector3d(0.0, 0.0, 0.072);
  p.weight_force = 80.0 * 9.81;
  p.thruster_offset = Eigen::Vector3d(-1.2, 0.0, 0.0);
  p.force_limits = {-70.0, 70.0};
  const double angle = 30.0 * std::numbers::pi / 180.0;
  p.psi_limits = {-angle, angle};
  p.phi_limits = {-angle, angle};
  p.psi_rate_limits = {-0.5, 0.5};
  p.phi_rate_limits = {-0.5, 0.5};
  return p;
}

FullState FullState::FromVector(const Vector17d& x) {
  FullState out;
  out.s = x.head<9>();
  out.v = x.tail<8>();
  return out;
}

Vector17d FullState::vector() const {
  Vector17d x;
  x << s, v;
  return x;
}

VehicleModel::VehicleModel(VehicleParams params)
    : params_(std::move(params)), mass_(params_.mass_matrix()) {
  params_.validate();
  llt_.compute(mass_);
  if (llt_.info() != Eigen::Success) {
    throw Error(ErrorCode::kSingularMass, "mass matrix is not positive definite");
  }
}

Matrix8d coriolis_matrix(const VehicleParams& params, const Vector8d& v) {
  const Matrix8d m = params.mass_matrix();
  const Eigen::Matrix<double, 6, 1> momentum = m.topLeftCorner<6, 6>() * v.head<6>();
  const Eigen::Matrix3d sh = Skew<double>(momentum.head<3>());
  const Eigen::Matrix3d sp = Skew<double>(momentum.tail<3>());
  Matrix8d c = Matrix8d::Zero();
  c.block<3, 3>(0, 0) = -sh;
  c.block<3, 3>(0, 3) = -sp;
  c.block<3, 3>(3, 0) = -sp;
  return c;
}

Vector8d damping_force(const VehicleParams& params, const Vector8d& v) {
  return detail::Damping<double>(params, v);
}

Vector8d restoring_wrench(const VehicleParams& params, const UnitQuaternion& q) {
  return detail::Restoring<double>(params, q.coeffs);
}

Matrix86d thruster_jacobian(const VehicleParams& params, const Vector9d& s) {
  return detail::ThrusterMap<double>(params, s[idx::kPsi], s[idx::kPhi]);
}

Eigen::Matrix<double, 6, 1> thruster_wrench(const VehicleParams& params, const ControlInput& u) {
  return detail::Wrench<double>(params, u.vector());
}

Vector8d forward_dynamics(const VehicleModel& model, const FullState& x, const ControlInput& u) {
  const Vector8d rhs = detail::GeneralizedForce<double>(model.params(), model.mass_matrix(),
                                                        x.vector(), u.vector());
  if (!rhs.allFinite()) throw Error(ErrorCode::kNonFinite, "non-finite generalized force");
  return model.solve_mass(rhs);
}

Vector17d state_derivative(const VehicleModel& model, const Vector17d& x, const Eigen::Vector3d& u) {
  return state_derivative(model, x, u, Vector8d::Zero());
}

Vector17d state_derivative(const VehicleModel& model, const Vector17d& x, const Eigen::Vector3d& u,
                           const Vector8d& external) {
  Vector17d out;
  out.head<9>() = detail::Kinematics<double>(model.params(), x);
  const Vector8d rhs =
      detail::GeneralizedForce<double>(model.params(), model.mass_matrix(), x, u) + external;
  out.tail<8>() = model.solve_mass(rhs);
  if (!out.allFinite()) throw Error(ErrorCode::kNonFinite, "non-finite state derivative");
  return out;
}

Vector17d state_derivative(const VehicleModel& model, const FullState& x, const ControlInput& u) {
  return state_derivative(model, x.vector(), u.vector());
}

DynamicsJacobian state_derivative_jacobian(const VehicleModel& model, const Vector17d& x,
                                           const Eigen::Vector3d& u) {
  using Deriv = Eigen::Matrix<double, 20, 1>;
  using AD = Eigen::AutoDiffScalar<Deriv>;
  detail::Vec17<AD> xa;
  for (int i = 0; i < 17; ++i) xa[i] = AD(x[i], 20, i);
  Vector3<AD> ua;
  for (int i = 0; i < 3; ++i) ua[i] = AD(u[i], 20, 17 + i);

  const Eigen::Matrix<AD, 9, 1> sdot = detail::Kinematics<AD>(model.params(), xa);
  const detail::Vec8<AD> force =
      detail::GeneralizedForce<AD>(model.params(), model.mass_matrix(), xa, ua);

  DynamicsJacobian out;
  Eigen::Matrix<double, 17, 20> jac;
  Vector8d force_value;
  Eigen::Matrix<double, 8, 20> force_jac;
  for (int i = 0; i < 9; ++i) {
    out.value[i] = sdot[i].value();
    jac.row(i) = sdot[i].derivatives().transpose();
  }
  for (int i = 0; i < 8; ++i) {
    force_value[i] = force[i].value();
    force_jac.row(i) = force[i].derivatives().transpose();
  }
  out.value.tail<8>() = model.solve_mass(force_value);
  jac.bottomRows<8>() = model.solve_mass(force_jac);
  if (!out.value.allFinite() || !jac.allFinite()) {
    throw Error(ErrorCode::kNonFinite, "non-finite state derivative");
  }
  out.dx = jac.leftCols<17>();
  out.du = jac.rightCols<3>();
  return out;
}

std::pair<double, double> linkage_inverse_kinematics(const VehicleParams& params, double psi,
                                                     double phi) {
  const Eigen::Matrix3d r = detail::ThrusterRotation<double>(psi, phi);
  const LinkageGeometry& g = params.linkage;
  std::array<double, 2> len{};
  for (int i = 0; i < 2; ++i) {
    len[i] = (r * g.housing_anchor[i] - g.hull_anchor[i]).norm();
    if (!g.stroke.contains(len[i])) {
      std::ostringstream msg;
      msg << "actuator " << i + 1 << " length " << len[i] << " m outside stroke ["
          << g.stroke.min << ", " << g.stroke.max << "] at psi=" << psi << ", phi=" << phi;
      throw Error(ErrorCode::kUnreachablePose, msg.str());
    }
  }
  return {len[0], len[1]};
}

double kinetic_energy(const VehicleModel& model, const Vector8d& v) {
  return 0.5 * v.dot(model.mass_matrix() * v);
}

}  // namespace vtauv
