#pragma once

// Scalar-generic pieces of the equation of motion, shared by the double
// evaluation path and the AD Jacobian path.

#include <cmath>

#include "vtauv/mathkit.hpp"
#include "vtauv/vehicle.hpp"

namespace vtauv::detail {

template <typename S>
using Vec8 = Eigen::Matrix<S, 8, 1>;
template <typename S>
using Vec17 = Eigen::Matrix<S, 17, 1>;

// Thruster frame relative to the body: Rz(ψ) Ry(φ).
template <typename S>
Matrix3<S> ThrusterRotation(const S& psi, const S& phi) {
  using std::cos;
  using std::sin;
  const S cp = cos(psi), sp = sin(psi), ct = cos(phi), st = sin(phi);
  Matrix3<S> r;
  r << cp * ct, -sp, cp * st,
       sp * ct, cp, sp * st,
       -st, S(0), ct;
  return r;
}

template <typename S>
Eigen::Matrix<S, 8, 6> ThrusterMap(const VehicleParams& p, const S& psi, const S& phi) {
  Eigen::Matrix<S, 8, 6> g = Eigen::Matrix<S, 8, 6>::Zero();
  const Matrix3<S> r_bt = ThrusterRotation<S>(psi, phi);
  const Vector3<S> arm = p.thruster_offset.template cast<S>();
  for (int j = 0; j < 3; ++j) {
    const Vector3<S> dir = r_bt.col(j);
    g.template block<3, 1>(0, 3 + j) = arm.cross(dir);
    g.template block<3, 1>(3, 3 + j) = dir;
  }
  g(7, 1) = S(1);  // torque-y drives the tilt joint
  g(6, 2) = S(1);  // torque-z drives the pan joint
  return g;
}

template <typename S>
Eigen::Matrix<S, 6, 1> Wrench(const VehicleParams& p, const Vector3<S>& u) {
  Eigen::Matrix<S, 6, 1> w = Eigen::Matrix<S, 6, 1>::Zero();
  w[p.wrench_map.force] += u[0];
  w[p.wrench_map.tau_psi] += u[1];
  w[p.wrench_map.tau_phi] += u[2];
  return w;
}

template <typename S>
Vec8<S> CoriolisTimesVelocity(const Matrix8d& mass, const Vec8<S>& v) {
  const Eigen::Matrix<S, 6, 1> v6 = v.template head<6>();
  const Eigen::Matrix<S, 6, 1> momentum = mass.topLeftCorner<6, 6>().template cast<S>() * v6;
  const Vector3<S> h = momentum.template head<3>();
  const Vector3<S> lin = momentum.template tail<3>();
  const Vector3<S> omega = v6.template head<3>();
  const Vector3<S> vel = v6.template tail<3>();
  Vec8<S> out = Vec8<S>::Zero();
  out.template head<3>() = omega.cross(h) + vel.cross(lin);
  out.template segment<3>(3) = omega.cross(lin);
  return out;
}

template <typename S>
Vec8<S> Damping(const VehicleParams& p, const Vec8<S>& v) {
  using std::abs;
  Vec8<S> out = p.linear_damping.template cast<S>() * v;
  for (int i = 0; i < 8; ++i) out[i] += p.quadratic_damping[i] * abs(v[i]) * v[i];
  return out;
}

template <typename S>
Vec8<S> Restoring(const VehicleParams& p, const Vector4<S>& q) {
  const Matrix3<S> r = RotationFromCoeffs<S>(q);
  const Vector3<S> gravity_world(S(0), S(0), S(-p.weight_force));
  const Vector3<S> f_g = r.transpose() * gravity_world;
  const Vector3<S> lever = (p.center_of_gravity - p.center_of_buoyancy).template cast<S>();
  Vec8<S> out = Vec8<S>::Zero();
  out.template head<3>() = -lever.cross(f_g);
  return out;
}

// Right-hand side M v̇ = Gᵀw − C(v)v − D(v)v − r(s).
template <typename S>
Vec8<S> GeneralizedForce(const VehicleParams& p, const Matrix8d& mass, const Vec17<S>& x,
                         const Vector3<S>& u) {
  const Vector4<S> q = x.template head<4>();
  const Vec8<S> v = x.template tail<8>();
  const Eigen::Matrix<S, 8, 6> g = ThrusterMap<S>(p, x[idx::kPsi], x[idx::kPhi]);
  return g * Wrench<S>(p, u) - CoriolisTimesVelocity<S>(mass, v) - Damping<S>(p, v) -
         Restoring<S>(p, q);
}

// Derivative of the generalized positions.
template <typename S>
Eigen::Matrix<S, 9, 1> Kinematics(const VehicleParams& p, const Vec17<S>& x) {
  const Vector4<S> q = x.template head<4>();
  const Vector3<S> omega = x.template segment<3>(idx::kOmega);
  const Vector3<S> vel = x.template segment<3>(idx::kLinVel);
  Eigen::Matrix<S, 9, 1> sdot;
  sdot.template head<4>() =
      QuaternionRate<S>(q, omega) + (p.quaternion_stabilization * (S(1) - q.squaredNorm())) * q;
  sdot.template segment<3>(4) = RotationFromCoeffs<S>(q) * vel;
  sdot[7] = x[idx::kPsiRate];
  sdot[8] = x[idx::kPhiRate];
  return sdot;
}

}  // namespace vtauv::detail
