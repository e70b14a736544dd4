#pragma once

// Quaternion and small dense linear-algebra helpers.
//
// Quaternions are stored scalar-first as (w, x, y, z) and represent the
// rotation from the body frame into the world frame. The templates accept any
// scalar type so the dynamics can be differentiated with forward-mode AD.

#include <Eigen/Dense>

#include <cmath>

namespace vtauv {

template <typename Scalar>
using Vector4 = Eigen::Matrix<Scalar, 4, 1>;
template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;

/// A rotation stored as (w, x, y, z). Call `normalize` after any arithmetic
/// that may leave it off the unit sphere.
struct UnitQuaternion {
  Eigen::Vector4d coeffs{1.0, 0.0, 0.0, 0.0};

  UnitQuaternion() = default;
  UnitQuaternion(double w, double x, double y, double z) : coeffs(w, x, y, z) {}
  explicit UnitQuaternion(const Eigen::Vector4d& wxyz) : coeffs(wxyz) {}

  static UnitQuaternion Identity() { return {}; }
  /// Rotation by `angle` [rad] about the (not necessarily unit) `axis`.
  static UnitQuaternion FromAxisAngle(const Eigen::Vector3d& axis, double angle);
  /// Intrinsic Z-Y-X (yaw, pitch, roll) angles.
  static UnitQuaternion FromYawPitchRoll(double yaw, double pitch, double roll);

  double w() const { return coeffs[0]; }
  double x() const { return coeffs[1]; }
  double y() const { return coeffs[2]; }
  double z() const { return coeffs[3]; }
  Eigen::Vector3d vec() const { return coeffs.tail<3>(); }
  double norm() const { return coeffs.norm(); }

  UnitQuaternion& normalize();
  UnitQuaternion normalized() const;
  UnitQuaternion conjugate() const;
};

/// Three-parameter attitude chart: the vector part of a unit quaternion whose
/// scalar part is non-negative.
struct ReducedQuaternion {
  Eigen::Vector3d vec = Eigen::Vector3d::Zero();
};

template <typename Scalar>
Matrix3<Scalar> Skew(const Vector3<Scalar>& a) {
  Matrix3<Scalar> s;
  s << Scalar(0), -a[2], a[1],
       a[2], Scalar(0), -a[0],
       -a[1], a[0], Scalar(0);
  return s;
}

/// Hamilton product p ⊗ q.
template <typename Scalar>
Vector4<Scalar> HamiltonProduct(const Vector4<Scalar>& p, const Vector4<Scalar>& q) {
  Vector4<Scalar> r;
  r[0] = p[0] * q[0] - p[1] * q[1] - p[2] * q[2] - p[3] * q[3];
  r[1] = p[0] * q[1] + p[1] * q[0] + p[2] * q[3] - p[3] * q[2];
  r[2] = p[0] * q[2] - p[1] * q[3] + p[2] * q[0] + p[3] * q[1];
  r[3] = p[0] * q[3] + p[1] * q[2] - p[2] * q[1] + p[3] * q[0];
  return r;
}

/// Rotation matrix of q / |q|. Non-unit inputs are handled homogeneously, so
/// the result is always proper orthogonal.
template <typename Scalar>
Matrix3<Scalar> RotationFromCoeffs(const Vector4<Scalar>& q) {
  const Scalar w = q[0], x = q[1], y = q[2], z = q[3];
  const Scalar s = Scalar(2) / (w * w + x * x + y * y + z * z);
  Matrix3<Scalar> r;
  r << Scalar(1) - s * (y * y + z * z), s * (x * y - w * z), s * (x * z + w * y),
       s * (x * y + w * z), Scalar(1) - s * (x * x + z * z), s * (y * z - w * x),
       s * (x * z - w * y), s * (y * z + w * x), Scalar(1) - s * (x * x + y * y);
  return r;
}

/// q̇ = ½ q ⊗ (0, ω) for a body-frame angular rate ω.
template <typename Scalar>
Vector4<Scalar> QuaternionRate(const Vector4<Scalar>& q, const Vector3<Scalar>& omega_body) {
  Vector4<Scalar> pure;
  pure << Scalar(0), omega_body;
  return Scalar(0.5) * HamiltonProduct<Scalar>(q, pure);
}

UnitQuaternion operator*(const UnitQuaternion& p, const UnitQuaternion& q);

/// Time derivative of q under body-frame angular rate `omega` [rad/s].
Eigen::Vector4d quat_derivative(const UnitQuaternion& q, const Eigen::Vector3d& omega);

Eigen::Matrix3d quat_to_rotation(const UnitQuaternion& q);

/// Scalar part sqrt(1 - |v|²) of the unit quaternion with vector part v.
/// Throws Error(kDomain) when |v| exceeds one by more than 1e-12.
double reconstruct_qw(const ReducedQuaternion& rq);

/// Unit quaternion (qw, v) rebuilt from its vector part.
UnitQuaternion reconstruct(const ReducedQuaternion& rq);

/// Vector part of q ⊗ q_ref⁻¹ on the hemisphere with non-negative scalar part.
ReducedQuaternion quat_error(const UnitQuaternion& q, const UnitQuaternion& q_ref);

/// Rotation angle [rad] of q ⊗ q_ref⁻¹, in [0, π].
double geodesic_angle(const UnitQuaternion& q, const UnitQuaternion& q_ref);

/// Intrinsic Z-Y-X angles (yaw, pitch, roll) [rad].
Eigen::Vector3d yaw_pitch_roll(const UnitQuaternion& q);

/// Normalized linear interpolation on the shortest arc.
UnitQuaternion nlerp(const UnitQuaternion& a, const UnitQuaternion& b, double s);

/// Spherical linear interpolation on the shortest arc.
UnitQuaternion slerp(const UnitQuaternion& a, const UnitQuaternion& b, double s);

}  // namespace vtauv
