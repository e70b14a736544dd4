#include "vtauv/vehicle.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "test_util.hpp"
#include "vtauv/errors.hpp"

namespace vtauv {
namespace {

using testing::Gen;
using testing::MaxAbs;
constexpr double kPi = std::numbers::pi;

VehicleParams DiagonalParams() {
  VehicleParams p = DefaultVehicleParams();
  Vector8d m;
  m << 3.0, 40.0, 41.0, 90.0, 150.0, 155.0, 1.0, 1.0;
  p.rigid_mass_matrix = m.asDiagonal();
  p.added_mass_matrix.setZero();
  return p;
}

TEST(CoriolisMatrix, ZeroAtRest) {
  EXPECT_EQ(coriolis_matrix(DefaultVehicleParams(), Vector8d::Zero()), Matrix8d::Zero());
}

TEST(CoriolisMatrix, SkewSymmetricAndWorkless) {
  Gen gen(11);
  VehicleParams p = DefaultVehicleParams();
  // Fully populated symmetric added mass to exercise the coupling blocks.
  Matrix8d a = Matrix8d::Zero();
  a.topLeftCorner<6, 6>() = Eigen::Matrix<double, 6, 6>::Random() * 3.0;
  a = (a * a.transpose()).eval();
  p.added_mass_matrix += a;
  for (int i = 0; i < 1000; ++i) {
    const Vector8d v = gen.vec<8>(-3.0, 3.0);
    const Matrix8d c = coriolis_matrix(p, v);
    EXPECT_LT(MaxAbs(c + c.transpose()), 1e-10);
    EXPECT_NEAR(v.dot(c * v), 0.0, 1e-10);
  }
}

TEST(CoriolisMatrix, SurgeYawCouplingOnDiagonalMass) {
  const VehicleParams p = DiagonalParams();
  const double u = 1.7, r = 0.4;
  Vector8d v = Vector8d::Zero();
  v[2] = r;
  v[3] = u;
  const Vector8d cv = coriolis_matrix(p, v) * v;
  // ω × (m v_lin): sway entry m_x·u·r for diagonal M.
  EXPECT_NEAR(cv[4], p.rigid_mass_matrix(3, 3) * u * r, 1e-12);
  EXPECT_NEAR(coriolis_matrix(p, v)(4, 2), p.rigid_mass_matrix(3, 3) * u, 1e-12);
}

TEST(DampingForce, Examples) {
  VehicleParams p = DefaultVehicleParams();
  EXPECT_EQ(damping_force(p, Vector8d::Zero()), Vector8d::Zero());

  p.linear_damping.setZero();
  p.quadratic_damping.setZero();
  p.quadratic_damping[3] = 5.0;
  Vector8d v = Vector8d::Zero();
  v[3] = 2.0;
  EXPECT_DOUBLE_EQ(damping_force(p, v)[3], 20.0);
}

TEST(DampingForce, OddFunction) {
  Gen gen(12);
  const VehicleParams p = DefaultVehicleParams();
  for (int i = 0; i < 100; ++i) {
    const Vector8d v = gen.vec<8>(-2.0, 2.0);
    EXPECT_LT(MaxAbs(damping_force(p, -v) + damping_force(p, v)), 1e-12);
  }
}

TEST(RestoringWrench, CollocatedCentersGiveZero) {
  Gen gen(13);
  VehicleParams p = DefaultVehicleParams();
  p.center_of_buoyancy = p.center_of_gravity;
  for (int i = 0; i < 100; ++i) {
    EXPECT_EQ(restoring_wrench(p, gen.quaternion()), Vector8d::Zero());
  }
}

TEST(RestoringWrench, LevelWithVerticalSeparationIsZero) {
  const VehicleParams p = DefaultVehicleParams();  // c_g directly below c_b
  EXPECT_LT(restoring_wrench(p, UnitQuaternion::Identity()).norm(), 1e-12);
}

TEST(RestoringWrench, MaximalAtVerticalPose) {
  const VehicleParams p = DefaultVehicleParams();
  const double d = (p.center_of_buoyancy - p.center_of_gravity).norm();
  const UnitQuaternion nose_up = UnitQuaternion::FromYawPitchRoll(0.0, -kPi / 2, 0.0);
  const Vector8d r = restoring_wrench(p, nose_up);
  EXPECT_NEAR(r.head<3>().norm(), d * p.weight_force, 1e-9);
  EXPECT_NEAR(std::abs(r[1]), d * p.weight_force, 1e-9);
}

TEST(RestoringWrench, OpposesSmallPitch) {
  const VehicleModel model(DefaultVehicleParams());
  FullState x;
  x.set_quaternion(UnitQuaternion::FromYawPitchRoll(0.0, 0.2, 0.0));
  const Vector8d acc = forward_dynamics(model, x, {});
  EXPECT_LT(acc[1], 0.0);  // pitch rate accelerates back toward level
  x.set_quaternion(UnitQuaternion::FromYawPitchRoll(0.0, 0.0, -0.3));
  EXPECT_GT(forward_dynamics(model, x, {})[0], 0.0);
}

TEST(RestoringWrench, TorqueOnlyForEveryAttitude) {
  Gen gen(14);
  VehicleParams p = DefaultVehicleParams();
  p.center_of_gravity = Eigen::Vector3d(0.05, -0.02, -0.03);
  for (int i = 0; i < 100; ++i) {
    const Vector8d r = restoring_wrench(p, gen.quaternion());
    EXPECT_EQ(r.tail<5>(), (Eigen::Matrix<double, 5, 1>::Zero()));
  }
}

TEST(ThrusterJacobian, AxialThrustIsPureSurge) {
  const VehicleParams p = DefaultVehicleParams();
  const Vector9d s = FullState().s;
  const Matrix86d g = thruster_jacobian(p, s);
  const Vector8d f = g * thruster_wrench(p, {25.0, 0.0, 0.0});
  Vector8d expected = Vector8d::Zero();
  expected[3] = 25.0;
  EXPECT_LT(MaxAbs(f - expected), 1e-12);
}

TEST(ThrusterJacobian, LateralThrustAtNinetyDegreesPan) {
  const VehicleParams p = DefaultVehicleParams();
  Vector9d s = FullState().s;
  s[idx::kPsi] = kPi / 2;
  const double thrust = 10.0;
  const Vector8d f = thruster_jacobian(p, s) * thruster_wrench(p, {thrust, 0.0, 0.0});
  EXPECT_NEAR(f[4], thrust, 1e-12);
  EXPECT_NEAR(f[3], 0.0, 1e-12);
  EXPECT_NEAR(std::abs(f[2]), thrust * p.thruster_offset.norm(), 1e-12);
  EXPECT_NEAR(f[0], 0.0, 1e-12);
  EXPECT_NEAR(f[1], 0.0, 1e-12);
}

TEST(ThrusterJacobian, JointTorquesActOnJointsWithUnitGain) {
  Gen gen(15);
  const VehicleParams p = DefaultVehicleParams();
  for (int i = 0; i < 20; ++i) {
    Vector9d s = FullState().s;
    s[idx::kPsi] = gen.uniform(-0.5, 0.5);
    s[idx::kPhi] = gen.uniform(-0.5, 0.5);
    const Matrix86d g = thruster_jacobian(p, s);
    Vector8d e_psi = Vector8d::Zero(), e_phi = Vector8d::Zero();
    e_psi[6] = 1.0;
    e_phi[7] = 1.0;
    EXPECT_EQ(Vector8d(g.col(p.wrench_map.tau_psi)), e_psi);
    EXPECT_EQ(Vector8d(g.col(p.wrench_map.tau_phi)), e_phi);
  }
}

TEST(ThrusterJacobian, OffAxisOffsetInducesTorque) {
  VehicleParams p = DefaultVehicleParams();
  p.thruster_offset = Eigen::Vector3d(-1.2, 0.0, 0.1);
  const Vector8d f = thruster_jacobian(p, FullState().s) * thruster_wrench(p, {10.0, 0.0, 0.0});
  EXPECT_NEAR(f[3], 10.0, 1e-12);
  EXPECT_NEAR(f[1], 0.1 * 10.0, 1e-12);  // r × F, y entry = r_z F_x
}

TEST(ForwardDynamics, EquilibriumAtRest) {
  VehicleParams p = DefaultVehicleParams();
  p.center_of_buoyancy = p.center_of_gravity;
  const VehicleModel model(p);
  FullState x;
  x.set_quaternion(UnitQuaternion::FromYawPitchRoll(0.4, -0.3, 0.2));
  EXPECT_EQ(forward_dynamics(model, x, {}), Vector8d::Zero());
}

TEST(ForwardDynamics, SurgeAccelerationFromAxialThrust) {
  const VehicleModel model(DiagonalParams());
  const Vector8d acc = forward_dynamics(model, FullState(), {30.0, 0.0, 0.0});
  Vector8d expected = Vector8d::Zero();
  expected[3] = 30.0 / model.mass_matrix()(3, 3);
  EXPECT_LT(MaxAbs(acc - expected), 1e-14);
}

TEST(ForwardDynamics, FactorizationResidual) {
  Gen gen(16);
  VehicleParams p = DefaultVehicleParams();
  Matrix8d a = Matrix8d::Random();
  p.added_mass_matrix += a * a.transpose();
  const VehicleModel model(p);
  for (int i = 0; i < 100; ++i) {
    FullState x;
    x.set_quaternion(gen.quaternion());
    x.v = gen.vec<8>();
    x.s[idx::kPsi] = gen.uniform(-0.5, 0.5);
    const ControlInput u{gen.uniform(-70, 70), gen.uniform(-1, 1), gen.uniform(-1, 1)};
    const Vector8d acc = forward_dynamics(model, x, u);
    const Vector8d rhs = thruster_jacobian(p, x.s) * thruster_wrench(p, u) -
                         coriolis_matrix(p, x.v) * x.v - damping_force(p, x.v) -
                         restoring_wrench(p, x.quaternion());
    EXPECT_LE((model.mass_matrix() * acc - rhs).norm(), 1e-10 * rhs.norm());
  }
}

TEST(ForwardDynamics, PassiveWhenUnforcedAndNeutral) {
  Gen gen(17);
  VehicleParams p = DefaultVehicleParams();
  p.center_of_buoyancy = p.center_of_gravity;
  const VehicleModel model(p);
  for (int i = 0; i < 200; ++i) {
    FullState x;
    x.set_quaternion(gen.quaternion());
    x.v = gen.vec<8>(-2.0, 2.0);
    const Vector8d acc = forward_dynamics(model, x, {});
    const double power = x.v.dot(model.mass_matrix() * acc);
    EXPECT_NEAR(power, -x.v.dot(damping_force(p, x.v)), 1e-9);
    EXPECT_LE(power, 1e-12);
  }
}

TEST(ForwardDynamics, TranslationInvariant) {
  Gen gen(18);
  const VehicleModel model(DefaultVehicleParams());
  for (int i = 0; i < 50; ++i) {
    FullState x;
    x.set_quaternion(gen.quaternion());
    x.v = gen.vec<8>();
    const ControlInput u{gen.uniform(-70, 70), 0.1, -0.2};
    FullState y = x;
    y.set_position(gen.vec<3>(-100.0, 100.0));
    EXPECT_EQ(forward_dynamics(model, x, u), forward_dynamics(model, y, u));
  }
}

TEST(VehicleModel, RejectsIndefiniteMass) {
  VehicleParams p = DefaultVehicleParams();
  p.rigid_mass_matrix(3, 3) = -200.0;
  try {
    VehicleModel model(p);
    FAIL() << "expected singular-mass error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSingularMass);
  }
}

TEST(VehicleParams, RejectsForceLimitsNotBracketingZero) {
  VehicleParams p = DefaultVehicleParams();
  p.force_limits = {5.0, 70.0};
  EXPECT_THROW(p.validate(), Error);
}

TEST(StateDerivative, ZeroAtEquilibrium) {
  const VehicleModel model(DefaultVehicleParams());
  EXPECT_LT(state_derivative(model, FullState(), ControlInput{}).norm(), 1e-15);
}

TEST(StateDerivative, SurgeMapsToWorldFrame) {
  const VehicleModel model(DefaultVehicleParams());
  FullState x;
  x.v[3] = 1.5;
  Vector17d xd = state_derivative(model, x, ControlInput{});
  EXPECT_DOUBLE_EQ(xd[idx::kPos], 1.5);
  EXPECT_EQ(xd[idx::kPos + 1], 0.0);

  x.set_quaternion(UnitQuaternion::FromAxisAngle(Eigen::Vector3d::UnitZ(), kPi / 2));
  xd = state_derivative(model, x, ControlInput{});
  EXPECT_NEAR(xd[idx::kPos], 0.0, 1e-12);
  EXPECT_NEAR(xd[idx::kPos + 1], 1.5, 1e-12);
}

TEST(StateDerivative, StabilizationVanishesOnUnitQuaternions) {
  Gen gen(19);
  const VehicleModel model(DefaultVehicleParams());
  for (int i = 0; i < 100; ++i) {
    FullState x;
    x.set_quaternion(gen.quaternion());
    x.v = gen.vec<8>();
    const Vector17d xd = state_derivative(model, x, ControlInput{});
    EXPECT_LT((xd.head<4>() - quat_derivative(x.quaternion(), x.omega())).norm(), 1e-13);
  }
}

TEST(StateDerivativeJacobian, MatchesCentralDifferences) {
  Gen gen(20);
  const VehicleModel model(DefaultVehicleParams());
  for (int trial = 0; trial < 20; ++trial) {
    Vector17d x = FullState().vector();
    x.head<4>() = gen.quaternion().coeffs * gen.uniform(0.999, 1.001);
    x.segment<3>(4) = gen.vec<3>(-5, 5);
    x[7] = gen.uniform(-0.5, 0.5);
    x[8] = gen.uniform(-0.5, 0.5);
    x.tail<8>() = gen.vec<8>(-1.0, 1.0);
    const Eigen::Vector3d u(gen.uniform(-70, 70), gen.uniform(-2, 2), gen.uniform(-2, 2));
    const DynamicsJacobian jac = state_derivative_jacobian(model, x, u);
    EXPECT_LT(MaxAbs(jac.value - state_derivative(model, x, u)), 1e-12);
    for (int j = 0; j < 20; ++j) {
      const double h = 1e-6 * std::max(1.0, j < 17 ? std::abs(x[j]) : std::abs(u[j - 17]));
      Vector17d xp = x, xm = x;
      Eigen::Vector3d up = u, um = u;
      if (j < 17) {
        xp[j] += h;
        xm[j] -= h;
      } else {
        up[j - 17] += h;
        um[j - 17] -= h;
      }
      const Vector17d fd =
          (state_derivative(model, xp, up) - state_derivative(model, xm, um)) / (2.0 * h);
      const Vector17d ad = j < 17 ? Vector17d(jac.dx.col(j)) : Vector17d(jac.du.col(j - 17));
      EXPECT_LT(MaxAbs(fd - ad), 1e-6 * std::max(1.0, MaxAbs(ad))) << "column " << j;
    }
  }
}

// Geometry-only actuator lengths, written independently of the library.
Eigen::Vector2d OracleLengths(const VehicleParams& p, double psi, double phi) {
  const Eigen::Matrix3d r =
      (Eigen::AngleAxisd(psi, Eigen::Vector3d::UnitZ()) * Eigen::AngleAxisd(phi, Eigen::Vector3d::UnitY()))
          .toRotationMatrix();
  const LinkageGeometry& g = p.linkage;
  return {(r * g.housing_anchor[0] - g.hull_anchor[0]).norm(),
          (r * g.housing_anchor[1] - g.hull_anchor[1]).norm()};
}

// Forward kinematics oracle: damped Newton iteration on (ψ, φ) for given lengths.
std::pair<double, double> SolveLinkageForward(const VehicleParams& p, double l1, double l2) {
  Eigen::Vector2d angles = Eigen::Vector2d::Zero();
  const Eigen::Vector2d target(l1, l2);
  for (int it = 0; it < 200; ++it) {
    const Eigen::Vector2d r = OracleLengths(p, angles[0], angles[1]) - target;
    if (r.norm() < 1e-15) break;
    Eigen::Matrix2d jac;
    const double h = 1e-7;
    jac.col(0) = (OracleLengths(p, angles[0] + h, angles[1]) - OracleLengths(p, angles[0] - h, angles[1])) / (2 * h);
    jac.col(1) = (OracleLengths(p, angles[0], angles[1] + h) - OracleLengths(p, angles[0], angles[1] - h)) / (2 * h);
    Eigen::Vector2d step = jac.lu().solve(r);
    if (step.norm() > 0.1) step *= 0.1 / step.norm();
    angles -= step;
  }
  return {angles[0], angles[1]};
}

TEST(LinkageInverseKinematics, NeutralPose) {
  const VehicleParams p = DefaultVehicleParams();
  const auto [l1, l2] = linkage_inverse_kinematics(p, 0.0, 0.0);
  const LinkageGeometry& g = p.linkage;
  EXPECT_DOUBLE_EQ(l1, (g.housing_anchor[0] - g.hull_anchor[0]).norm());
  EXPECT_DOUBLE_EQ(l2, (g.housing_anchor[1] - g.hull_anchor[1]).norm());
}

TEST(LinkageInverseKinematics, MirrorSymmetrySwapsActuators) {
  Gen gen(21);
  const VehicleParams p = DefaultVehicleParams();
  for (int i = 0; i < 100; ++i) {
    const double psi = gen.uniform(p.psi_limits.min, p.psi_limits.max);
    const double phi = gen.uniform(p.phi_limits.min, p.phi_limits.max);
    const auto [a1, a2] = linkage_inverse_kinematics(p, psi, phi);
    const auto [b1, b2] = linkage_inverse_kinematics(p, -psi, phi);
    EXPECT_NEAR(a1, b2, 1e-14);
    EXPECT_NEAR(a2, b1, 1e-14);
  }
}

TEST(LinkageInverseKinematics, ForwardRoundTrip) {
  Gen gen(22);
  const VehicleParams p = DefaultVehicleParams();
  for (int i = 0; i < 100; ++i) {
    const double psi = gen.uniform(p.psi_limits.min, p.psi_limits.max);
    const double phi = gen.uniform(p.phi_limits.min, p.phi_limits.max);
    const auto [l1, l2] = linkage_inverse_kinematics(p, psi, phi);
    const auto [psi_fk, phi_fk] = SolveLinkageForward(p, l1, l2);
    EXPECT_NEAR(psi_fk, psi, 1e-8);
    EXPECT_NEAR(phi_fk, phi, 1e-8);
  }
}

TEST(LinkageInverseKinematics, UnreachablePose) {
  VehicleParams p = DefaultVehicleParams();
  p.linkage.stroke = {0.40, 0.42};
  try {
    linkage_inverse_kinematics(p, 0.5, 0.5);
    FAIL() << "expected unreachable-pose error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnreachablePose);
  }
}

}  // namespace
}  // namespace vtauv
