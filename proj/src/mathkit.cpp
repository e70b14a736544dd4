#include "vtauv/mathkit.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "vtauv/errors.hpp"

namespace vtauv {

UnitQuaternion UnitQuaternion::FromAxisAngle(const Eigen::Vector3d& axis, double angle) {
  const double n = axis.norm();
  if (n == 0.0) return Identity();
  const Eigen::Vector3d u = axis / n;
  const double s = std::sin(0.5 * angle);
  return {std::cos(0.5 * angle), s * u.x(), s * u.y(), s * u.z()};
}

UnitQuaternion UnitQuaternion::FromYawPitchRoll(double yaw, double pitch, double roll) {
  const UnitQuaternion qz = FromAxisAngle(Eigen::Vector3d::UnitZ(), yaw);
  const UnitQuaternion qy = FromAxisAngle(Eigen::Vector3d::UnitY(), pitch);
  const UnitQuaternion qx = FromAxisAngle(Eigen::Vector3d::UnitX(), roll);
  return qz * qy * qx;
}

UnitQuaternion& UnitQuaternion::normalize() {
  coeffs /= coeffs.norm();
  return *this;
}

UnitQuaternion UnitQuaternion::normalized() const {
  UnitQuaternion q = *this;
  return q.normalize();
}

UnitQuaternion UnitQuaternion::conjugate() const { return {w(), -x(), -y(), -z()}; }

UnitQuaternion operator*(const UnitQuaternion& p, const UnitQuaternion& q) {
  return UnitQuaternion(HamiltonProduct<double>(p.coeffs, q.coeffs));
}

Eigen::Vector4d quat_derivative(const UnitQuaternion& q, const Eigen::Vector3d& omega) {
  return QuaternionRate<double>(q.coeffs, omega);
}

Eigen::Matrix3d quat_to_rotation(const UnitQuaternion& q) {
  return RotationFromCoeffs<double>(q.coeffs);
}

double reconstruct_qw(const ReducedQuaternion& rq) {
  const double s = rq.vec.squaredNorm();
  if (!(s <= 1.0 + 1e-12)) {
    std::ostringstream msg;
    msg << "reduced quaternion has vector norm " << std::sqrt(s) << " > 1";
    throw Error(ErrorCode::kDomain, msg.str());
  }
  return std::sqrt(std::max(0.0, 1.0 - s));
}

UnitQuaternion reconstruct(const ReducedQuaternion& rq) {
  return {reconstruct_qw(rq), rq.vec.x(), rq.vec.y(), rq.vec.z()};
}

ReducedQuaternion quat_error(const UnitQuaternion& q, const UnitQuaternion& q_ref) {
  // q ⊗ q_ref* written so that equal inputs cancel exactly.
  const Eigen::Vector3d v = q.vec(), v_ref = q_ref.vec();
  const double w = q.w() * q_ref.w() + v.dot(v_ref);
  const Eigen::Vector3d vec = (q_ref.w() * v - q.w() * v_ref) - v.cross(v_ref);
  ReducedQuaternion out;
  out.vec = w < 0.0 ? Eigen::Vector3d(-vec) : vec;
  return out;
}

double geodesic_angle(const UnitQuaternion& q, const UnitQuaternion& q_ref) {
  const UnitQuaternion e = (q.normalized() * q_ref.normalized().conjugate());
  return 2.0 * std::atan2(e.vec().norm(), std::abs(e.w()));
}

Eigen::Vector3d yaw_pitch_roll(const UnitQuaternion& q) {
  const Eigen::Matrix3d r = quat_to_rotation(q);
  const double pitch = std::asin(std::clamp(-r(2, 0), -1.0, 1.0));
  const double yaw = std::atan2(r(1, 0), r(0, 0));
  const double roll = std::atan2(r(2, 1), r(2, 2));
  return {yaw, pitch, roll};
}

UnitQuaternion nlerp(const UnitQuaternion& a, const UnitQuaternion& b, double s) {
  const double sign = a.coeffs.dot(b.coeffs) < 0.0 ? -1.0 : 1.0;
  UnitQuaternion q((1.0 - s) * a.coeffs + s * sign * b.coeffs);
  return q.normalize();
}

UnitQuaternion slerp(const UnitQuaternion& a, const UnitQuaternion& b, double s) {
  const UnitQuaternion an = a.normalized();
  UnitQuaternion bn = b.normalized();
  double c = an.coeffs.dot(bn.coeffs);
  if (c < 0.0) {
    bn.coeffs = -bn.coeffs;
    c = -c;
  }
  if (c > 1.0 - 1e-12) return nlerp(an, bn, s);
  const double theta = std::acos(std::min(1.0, c));
  const double st = std::sin(theta);
  UnitQuaternion q((std::sin((1.0 - s) * theta) / st) * an.coeffs +
                   (std::sin(s * theta) / st) * bn.coeffs);
  return q.normalize();
}

}  // namespace vtauv
