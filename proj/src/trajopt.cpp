#include "vtauv/trajopt.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <memory>
#include <sstream>

#include "textio.hpp"
#include "vtauv/errors.hpp"

namespace vtauv {
namespace {

using textio::ParseDouble;
using textio::WriteDouble;

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNormLo = 0.999;
constexpr double kNormHi = 1.001;

using Triplets = std::vector<Eigen::Triplet<double>>;

// Left-multiplication matrix: L(p) q = p ⊗ q.
Eigen::Matrix4d LeftProduct(const Eigen::Vector4d& p) {
  Eigen::Matrix4d l;
  l << p[0], -p[1], -p[2], -p[3],
       p[1], p[0], -p[3], p[2],
       p[2], p[3], p[0], -p[1],
       p[3], -p[2], p[1], p[0];
  return l;
}

// Rows of z ↦ vec(q_target* ⊗ q); zero iff q is a multiple of q_target.
Eigen::Matrix<double, 3, 4> AttitudeResidualMatrix(const UnitQuaternion& target) {
  return LeftProduct(target.conjugate().coeffs).bottomRows<3>();
}

void Invalid(const std::string& msg) { throw Error(ErrorCode::kInvalidSpec, msg); }

void CheckBoundaryState(const FullState& x, const VehicleParams& p, const char* which) {
  const std::string w(which);
  if (!x.vector().allFinite()) Invalid(w + " state is not finite");
  if (std::abs(x.quaternion().norm() - 1.0) > 1e-9) Invalid(w + " quaternion is not unit norm");
  if (!p.psi_limits.contains(x.psi())) Invalid(w + " thruster yaw outside limits");
  if (!p.phi_limits.contains(x.phi())) Invalid(w + " thruster pitch outside limits");
  if (!p.psi_rate_limits.contains(x.psi_rate())) Invalid(w + " thruster yaw rate outside limits");
  if (!p.phi_rate_limits.contains(x.phi_rate())) Invalid(w + " thruster pitch rate outside limits");
}

struct Counts {
  int defects = 0;
  int attitude = 0;
  int hold = 0;
  int acc_init = 0;
  int acc_final = 0;
  int norm = 0;
  int sign = 0;
  int climb = 0;
  int equalities() const { return defects + attitude + hold + acc_init + acc_final; }
  int inequalities() const { return 2 * norm + sign + climb; }
};

Counts CountConstraints(const TranscriptionSpec& spec) {
  const int t = spec.knots;
  Counts n;
  n.defects = 17 * (t + 1);
  n.attitude = spec.final_attitude ? 3 : 0;
  n.hold = 3 * spec.hold_knots;
  n.acc_init = spec.initial_acceleration ? 8 : 0;
  n.acc_final = spec.final_acceleration ? 8 : 0;
  n.norm = t + 2;
  n.sign = spec.final_attitude ? 1 : 0;
  n.climb = spec.min_climb ? t : 0;
  return n;
}

double DefectNorm(const Vector17d& d, int begin, int count) {
  return d.segment(begin, count).cwiseAbs().maxCoeff();
}

const char* const kColumns[] = {
    "time[s]",      "qw[-]",         "qx[-]",         "qy[-]",      "qz[-]",
    "x[m]",         "y[m]",          "z[m]",          "psi[rad]",   "phi[rad]",
    "wx[rad/s]",    "wy[rad/s]",     "wz[rad/s]",     "u[m/s]",     "v[m/s]",
    "w[m/s]",       "psi_rate[rad/s]", "phi_rate[rad/s]", "f[N]",   "tau_psi[N*m]",
    "tau_phi[N*m]"};
constexpr int kNumColumns = 21;

}  // namespace

void TranscriptionSpec::validate(const VehicleParams& params) const {
  if (knots < 2) Invalid("knot count T must be at least 2");
  if (!(time_step.min > 0.0) || !(time_step.min <= time_step.max) || !std::isfinite(time_step.max)) {
    Invalid("time-step bounds must satisfy 0 < h_min <= h_max < inf");
  }
  CheckBoundaryState(initial, params, "initial");
  CheckBoundaryState(target, params, "target");
  if (hold_knots < 0 || hold_knots > knots - 1) Invalid("hold_knots must lie in [0, T-1]");
  if (hold_knots > 0 && !final_attitude) Invalid("a hold segment requires the final attitude");
  if (!(weights.position >= 0.0) || !(weights.input >= 0.0) || !(weights.duration >= 0.0)) {
    Invalid("cost weights must be non-negative");
  }
  const Interval f = effective_force_limits(params);
  if (!(f.min <= f.max)) Invalid("force limits are inverted");
  for (const auto& acc : {initial_acceleration, final_acceleration}) {
    if (acc && !acc->allFinite()) Invalid("boundary acceleration is not finite");
  }
  if (lateral_limits) {
    const Interval l = *lateral_limits;
    for (const FullState* x : {&initial, &target}) {
      if (!l.contains(x->position().x()) || !l.contains(x->position().y())) {
        Invalid("boundary position outside the lateral limits");
      }
    }
  }
  if (min_climb && !std::isfinite(*min_climb)) Invalid("min_climb is not finite");
  if (guess_attitude && !(std::abs(guess_attitude->coeffs.norm() - 1.0) <= 1e-6)) {
    Invalid("guess attitude is not a unit quaternion");
  }
  if (!std::isfinite(guess_force) || !f.contains(guess_force)) {
    Invalid("guess force outside the force limits");
  }
}

FullState Trajectory::state_at(double t) const {
  const int n = knots();
  if (n < 0 || states.size() < static_cast<size_t>(n + 1)) {
    throw Error(ErrorCode::kDimensionMismatch, "trajectory has no knots");
  }
  if (!(t > 0.0)) return FullState::FromVector(states[0]);
  if (t >= duration()) return FullState::FromVector(states[n]);
  const double pos = t / time_step;
  const int k = std::min(static_cast<int>(std::floor(pos)), n - 1);
  const double a = pos - k;
  Vector17d x = (1.0 - a) * states[k] + a * states[k + 1];
  const UnitQuaternion q = nlerp(UnitQuaternion(Eigen::Vector4d(states[k].head<4>())),
                                 UnitQuaternion(Eigen::Vector4d(states[k + 1].head<4>())), a);
  x.head<4>() = q.coeffs;
  return FullState::FromVector(x);
}

ControlInput Trajectory::input_at(double t) const {
  const int n = knots();
  if (n < 0) throw Error(ErrorCode::kDimensionMismatch, "trajectory has no inputs");
  if (!(t > 0.0)) return ControlInput::FromVector(inputs[0]);
  const int k = std::min(static_cast<int>(std::floor(t / time_step)), n);
  return ControlInput::FromVector(inputs[k]);
}

Eigen::VectorXd pack(const Trajectory& traj) {
  const DecisionLayout layout{traj.knots()};
  if (traj.states.size() != static_cast<size_t>(layout.knots + 2)) {
    throw Error(ErrorCode::kDimensionMismatch, "trajectory needs T+2 states and T+1 inputs");
  }
  Eigen::VectorXd z(layout.num_variables());
  for (int k = 0; k < layout.knots + 2; ++k) z.segment<17>(layout.state(k)) = traj.states[k];
  for (int k = 0; k < layout.knots + 1; ++k) z.segment<3>(layout.input(k)) = traj.inputs[k];
  z[layout.time_step()] = traj.time_step;
  return z;
}

Trajectory unpack(const Eigen::VectorXd& z, int knots) {
  const DecisionLayout layout{knots};
  if (z.size() != layout.num_variables()) {
    throw Error(ErrorCode::kDimensionMismatch, "decision vector size does not match T");
  }
  Trajectory traj;
  for (int k = 0; k < knots + 2; ++k) traj.states.push_back(z.segment<17>(layout.state(k)));
  for (int k = 0; k < knots + 1; ++k) traj.inputs.push_back(z.segment<3>(layout.input(k)));
  traj.time_step = z[layout.time_step()];
  return traj;
}

nlp::NlpProblem build_transcription(const TranscriptionSpec& spec, const VehicleParams& params) {
  spec.validate(params);
  auto model = std::make_shared<const VehicleModel>(params);
  const DecisionLayout layout{spec.knots};
  const Counts counts = CountConstraints(spec);
  const int t_knots = spec.knots;
  const int n = layout.num_variables();

  nlp::NlpProblem prob;
  prob.num_variables = n;
  prob.num_equalities = counts.equalities();
  prob.num_inequalities = counts.inequalities();

  // Bounds.
  prob.lower = Eigen::VectorXd::Constant(n, -kInf);
  prob.upper = Eigen::VectorXd::Constant(n, kInf);
  auto fix = [&](int i, double value) { prob.lower[i] = prob.upper[i] = value; };
  auto box = [&](int i, Interval range) {
    prob.lower[i] = std::max(prob.lower[i], range.min);
    prob.upper[i] = std::min(prob.upper[i], range.max);
  };
  for (int k = 0; k < t_knots + 2; ++k) {
    const int o = layout.state(k);
    for (int i = 0; i < 4; ++i) box(o + i, {-kNormHi, kNormHi});
    box(o + idx::kPsi, params.psi_limits);
    box(o + idx::kPhi, params.phi_limits);
    box(o + idx::kPsiRate, params.psi_rate_limits);
    box(o + idx::kPhiRate, params.phi_rate_limits);
    if (spec.lateral_limits && k > 0) {
      box(o + idx::kPos, *spec.lateral_limits);
      box(o + idx::kPos + 1, *spec.lateral_limits);
    }
  }
  const Vector17d x0 = spec.initial.vector();
  for (int i = 0; i < 17; ++i) fix(layout.state(0) + i, x0[i]);
  const Vector17d xf = spec.target.vector();
  const int oT = layout.state(t_knots);
  if (spec.final_position) {
    for (int i = 0; i < 3; ++i) fix(oT + idx::kPos + i, xf[idx::kPos + i]);
  }
  if (spec.final_thruster_angles) {
    fix(oT + idx::kPsi, xf[idx::kPsi]);
    fix(oT + idx::kPhi, xf[idx::kPhi]);
  }
  if (spec.final_velocity) {
    for (int i = 0; i < 8; ++i) fix(oT + idx::kVel + i, xf[idx::kVel + i]);
  }
  const Interval force = spec.effective_force_limits(params);
  for (int k = 0; k < t_knots + 1; ++k) box(layout.input(k), force);
  box(layout.time_step(), spec.time_step);

  // Objective.
  const CostWeights w = spec.weights;
  const Eigen::Vector3d p_goal = spec.target.position();
  prob.objective = [layout, w, p_goal, t_knots](const Eigen::VectorXd& z, Eigen::VectorXd* grad) {
    if (grad) grad->setZero(z.size());
    double f = 0.0;
    for (int k = 0; k < t_knots + 2; ++k) {
      const int o = layout.state(k) + idx::kPos;
      const Eigen::Vector3d e = z.segment<3>(o) - p_goal;
      f += w.position * e.squaredNorm();
      if (grad) grad->segment<3>(o) = 2.0 * w.position * e;
    }
    for (int k = 0; k < t_knots + 1; ++k) {
      const int o = layout.input(k);
      f += w.input * z.segment<3>(o).squaredNorm();
      if (grad) grad->segment<3>(o) = 2.0 * w.input * z.segment<3>(o);
    }
    const double d = t_knots * z[layout.time_step()];
    f += w.duration * d * d;
    if (grad) (*grad)[layout.time_step()] = 2.0 * w.duration * d * t_knots;
    return f;
  };
  prob.objective_hessian = [layout, w, t_knots, n](const Eigen::VectorXd&) {
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
    for (int k = 0; k < t_knots + 2; ++k) {
      diag.segment<3>(layout.state(k) + idx::kPos).setConstant(2.0 * w.position);
    }
    for (int k = 0; k < t_knots + 1; ++k) diag.segment<3>(layout.input(k)).setConstant(2.0 * w.input);
    diag[layout.time_step()] = 2.0 * w.duration * t_knots * t_knots;
    nlp::SparseMatrix h(n, n);
    h.reserve(Eigen::VectorXi::Constant(n, 1));
    for (int i = 0; i < n; ++i) {
      if (diag[i] != 0.0) h.insert(i, i) = diag[i];
    }
    h.makeCompressed();
    return h;
  };

  // Equalities.
  const UnitQuaternion q_target = spec.target.quaternion();
  const Eigen::Matrix<double, 3, 4> att = AttitudeResidualMatrix(q_target);
  const std::optional<Vector8d> acc0 = spec.initial_acceleration, accf = spec.final_acceleration;
  const int hold = spec.hold_knots;
  prob.equalities = [=](const Eigen::VectorXd& z, Eigen::VectorXd& c, nlp::SparseMatrix* jac) {
    c.resize(counts.equalities());
    Triplets trips;
    if (jac) trips.reserve(counts.defects * 40 + 4 * (counts.attitude + counts.hold) + 17 * 20);
    const double h = z[layout.time_step()];
    for (int k = 0; k <= t_knots; ++k) {
      const int ok = layout.state(k), ok1 = layout.state(k + 1), ou = layout.input(k);
      const Vector17d xk = z.segment<17>(ok), xk1 = z.segment<17>(ok1);
      const Eigen::Vector3d uk = z.segment<3>(ou);
      const int row = 17 * k;
      if (jac) {
        const DynamicsJacobian dj = state_derivative_jacobian(*model, xk1, uk);
        c.segment<17>(row) = xk1 - xk - h * dj.value;
        for (int i = 0; i < 17; ++i) {
          trips.emplace_back(row + i, ok + i, -1.0);
          for (int j = 0; j < 17; ++j) {
            const double v = (i == j ? 1.0 : 0.0) - h * dj.dx(i, j);
            if (v != 0.0) trips.emplace_back(row + i, ok1 + j, v);
          }
          for (int j = 0; j < 3; ++j) {
            if (dj.du(i, j) != 0.0) trips.emplace_back(row + i, ou + j, -h * dj.du(i, j));
          }
          trips.emplace_back(row + i, layout.time_step(), -dj.value[i]);
        }
      } else {
        c.segment<17>(row) = xk1 - xk - h * state_derivative(*model, xk1, uk);
      }
    }
    int row = counts.defects;
    auto attitude_rows = [&](int k) {
      const int o = layout.state(k);
      c.segment<3>(row) = att * z.segment<4>(o);
      if (jac) {
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 4; ++j)
            if (att(i, j) != 0.0) trips.emplace_back(row + i, o + j, att(i, j));
      }
      row += 3;
    };
    if (counts.attitude) attitude_rows(t_knots);
    for (int k = t_knots - hold; k < t_knots; ++k) attitude_rows(k);
    auto acceleration_rows = [&](int k, const Vector8d& target) {
      const int ox = layout.state(k), ou = layout.input(k);
      const Vector17d x = z.segment<17>(ox);
      const Eigen::Vector3d u = z.segment<3>(ou);
      if (jac) {
        const DynamicsJacobian dj = state_derivative_jacobian(*model, x, u);
        c.segment<8>(row) = dj.value.tail<8>() - target;
        for (int i = 0; i < 8; ++i) {
          for (int j = 0; j < 17; ++j)
            if (dj.dx(9 + i, j) != 0.0) trips.emplace_back(row + i, ox + j, dj.dx(9 + i, j));
          for (int j = 0; j < 3; ++j)
            if (dj.du(9 + i, j) != 0.0) trips.emplace_back(row + i, ou + j, dj.du(9 + i, j));
        }
      } else {
        c.segment<8>(row) = state_derivative(*model, x, u).tail<8>() - target;
      }
      row += 8;
    };
    if (acc0) acceleration_rows(0, *acc0);
    if (accf) acceleration_rows(t_knots, *accf);
    if (jac) {
      jac->resize(counts.equalities(), layout.num_variables());
      jac->setFromTriplets(trips.begin(), trips.end());
    }
  };

  // Inequalities g(z) ≤ 0.
  const std::optional<double> climb = spec.min_climb;
  const Eigen::Vector4d qf = q_target.coeffs;
  prob.inequalities = [=](const Eigen::VectorXd& z, Eigen::VectorXd& g, nlp::SparseMatrix* jac) {
    g.resize(counts.inequalities());
    Triplets trips;
    for (int k = 0; k < t_knots + 2; ++k) {
      const int o = layout.state(k);
      const Eigen::Vector4d q = z.segment<4>(o);
      const double s = q.squaredNorm();
      g[k] = s - kNormHi * kNormHi;
      g[counts.norm + k] = kNormLo * kNormLo - s;
      if (jac) {
        for (int j = 0; j < 4; ++j) {
          trips.emplace_back(k, o + j, 2.0 * q[j]);
          trips.emplace_back(counts.norm + k, o + j, -2.0 * q[j]);
        }
      }
    }
    int row = 2 * counts.norm;
    if (counts.sign) {
      const int o = layout.state(t_knots);
      g[row] = 0.5 - qf.dot(z.segment<4>(o));
      if (jac) {
        for (int j = 0; j < 4; ++j) trips.emplace_back(row, o + j, -qf[j]);
      }
      ++row;
    }
    if (climb) {
      for (int k = 0; k < t_knots; ++k) {
        const int z0 = layout.state(k) + idx::kPos + 2, z1 = layout.state(k + 1) + idx::kPos + 2;
        g[row] = *climb - (z[z1] - z[z0]);
        if (jac) {
          trips.emplace_back(row, z1, -1.0);
          trips.emplace_back(row, z0, 1.0);
        }
        ++row;
      }
    }
    if (jac) {
      jac->resize(counts.inequalities(), layout.num_variables());
      jac->setFromTriplets(trips.begin(), trips.end());
    }
  };
  return prob;
}

Eigen::VectorXd initial_guess(const TranscriptionSpec& spec) {
  const int t_knots = spec.knots;
  Trajectory guess;
  const Vector17d a = spec.initial.vector(), b = spec.target.vector();
  const UnitQuaternion qa = spec.initial.quaternion(), qb = spec.target.quaternion();
  for (int k = 0; k < t_knots + 2; ++k) {
    const double s = std::min(1.0, static_cast<double>(k) / t_knots);
    Vector17d x = (1.0 - s) * a + s * b;
    if (k == 0) x = a;
    if (k >= t_knots) x = b;
    UnitQuaternion q = slerp(qa, qb, s);
    if (spec.guess_attitude) {
      q = s < 0.5 ? slerp(qa, *spec.guess_attitude, 2.0 * s)
                  : slerp(*spec.guess_attitude, qb, 2.0 * s - 1.0);
    }
    x.head<4>() = (k == 0 ? qa : (k >= t_knots ? qb : q)).coeffs;
    guess.states.push_back(x);
  }
  guess.inputs.assign(t_knots + 1, Eigen::Vector3d(spec.guess_force, 0.0, 0.0));
  guess.time_step = 0.5 * (spec.time_step.min + spec.time_step.max);
  return pack(guess);
}

CostBreakdown evaluate_cost(const Trajectory& traj, const TranscriptionSpec& spec) {
  CostBreakdown c;
  const Eigen::Vector3d goal = spec.target.position();
  for (const Vector17d& x : traj.states) {
    c.position += spec.weights.position * (x.segment<3>(idx::kPos) - goal).squaredNorm();
  }
  for (const Eigen::Vector3d& u : traj.inputs) c.input += spec.weights.input * u.squaredNorm();
  const double d = traj.knots() * traj.time_step;
  c.duration = spec.weights.duration * d * d;
  return c;
}

double ViolationReport::get(const std::string& name) const {
  for (const auto& [key, value] : families) {
    if (key == name) return value;
  }
  throw Error(ErrorCode::kDimensionMismatch, "no constraint family named " + name);
}

double ViolationReport::max() const {
  double m = 0.0;
  for (const auto& entry : families) m = std::max(m, entry.second);
  return m;
}

ViolationReport validate_trajectory(const Trajectory& traj, const VehicleParams& params,
                                    const TranscriptionSpec* spec) {
  const int t_knots = traj.knots();
  if (t_knots < 0 || traj.states.size() != static_cast<size_t>(t_knots + 2)) {
    throw Error(ErrorCode::kDimensionMismatch, "trajectory needs T+2 states and T+1 inputs");
  }
  const VehicleModel model(params);
  const Interval force = spec ? spec->effective_force_limits(params) : params.force_limits;
  auto excess = [](Interval r, double v) { return std::max({0.0, v - r.max, r.min - v}); };

  double f_lim = 0.0, psi = 0.0, phi = 0.0, psi_rate = 0.0, phi_rate = 0.0, norm = 0.0;
  double kin = 0.0, dyn = 0.0;
  for (const Eigen::Vector3d& u : traj.inputs) f_lim = std::max(f_lim, excess(force, u[0]));
  for (const Vector17d& x : traj.states) {
    psi = std::max(psi, excess(params.psi_limits, x[idx::kPsi]));
    phi = std::max(phi, excess(params.phi_limits, x[idx::kPhi]));
    psi_rate = std::max(psi_rate, excess(params.psi_rate_limits, x[idx::kPsiRate]));
    phi_rate = std::max(phi_rate, excess(params.phi_rate_limits, x[idx::kPhiRate]));
    norm = std::max(norm, excess({kNormLo, kNormHi}, x.head<4>().norm()));
  }
  const double h = traj.time_step;
  for (int k = 0; k <= t_knots; ++k) {
    const Vector17d d =
        traj.states[k + 1] - traj.states[k] - h * state_derivative(model, traj.states[k + 1], traj.inputs[k]);
    kin = std::max(kin, DefectNorm(d, 0, 9));
    dyn = std::max(dyn, DefectNorm(d, 9, 8));
  }
  ViolationReport r;
  r.families = {{"force_limit", f_lim},         {"psi_limit", psi},
                {"phi_limit", phi},             {"psi_rate_limit", psi_rate},
                {"phi_rate_limit", phi_rate},   {"quaternion_norm", norm},
                {"kinematic_defect", kin},      {"dynamic_defect", dyn}};
  if (!spec) return r;

  r.families.emplace_back("time_step", excess(spec->time_step, h));
  r.families.emplace_back("initial_state",
                          (traj.states[0] - spec->initial.vector()).cwiseAbs().maxCoeff());
  const Vector17d& xT = traj.states[t_knots];
  const Vector17d xf = spec->target.vector();
  if (spec->final_position) {
    r.families.emplace_back("final_position",
                            (xT.segment<3>(idx::kPos) - xf.segment<3>(idx::kPos)).cwiseAbs().maxCoeff());
  }
  const Eigen::Matrix<double, 3, 4> att = AttitudeResidualMatrix(spec->target.quaternion());
  auto attitude_error = [&](const Vector17d& x) {
    const Eigen::Vector4d q = x.head<4>();
    if (q.dot(xf.head<4>()) < 0.5) return 1.0;
    return (att * q).cwiseAbs().maxCoeff();
  };
  if (spec->final_attitude) r.families.emplace_back("final_attitude", attitude_error(xT));
  if (spec->final_thruster_angles) {
    r.families.emplace_back("final_thruster_angles",
                            std::max(std::abs(xT[idx::kPsi] - xf[idx::kPsi]),
                                     std::abs(xT[idx::kPhi] - xf[idx::kPhi])));
  }
  if (spec->final_velocity) {
    r.families.emplace_back("final_velocity",
                            (xT.tail<8>() - xf.tail<8>()).cwiseAbs().maxCoeff());
  }
  if (spec->initial_acceleration) {
    const Vector17d f = state_derivative(model, traj.states[0], traj.inputs[0]);
    r.families.emplace_back("initial_acceleration",
                            (f.tail<8>() - *spec->initial_acceleration).cwiseAbs().maxCoeff());
  }
  if (spec->final_acceleration) {
    const Vector17d f = state_derivative(model, xT, traj.inputs[t_knots]);
    r.families.emplace_back("final_acceleration",
                            (f.tail<8>() - *spec->final_acceleration).cwiseAbs().maxCoeff());
  }
  if (spec->hold_knots > 0) {
    double worst = 0.0;
    for (int k = t_knots - spec->hold_knots; k < t_knots; ++k) {
      worst = std::max(worst, attitude_error(traj.states[k]));
    }
    r.families.emplace_back("hold_attitude", worst);
  }
  if (spec->lateral_limits) {
    double worst = 0.0;
    for (const Vector17d& x : traj.states) {
      worst = std::max({worst, excess(*spec->lateral_limits, x[idx::kPos]),
                        excess(*spec->lateral_limits, x[idx::kPos + 1])});
    }
    r.families.emplace_back("lateral_limit", worst);
  }
  if (spec->min_climb) {
    double worst = 0.0;
    for (int k = 0; k < t_knots; ++k) {
      const double climb = traj.states[k + 1][idx::kPos + 2] - traj.states[k][idx::kPos + 2];
      worst = std::max(worst, *spec->min_climb - climb);
    }
    r.families.emplace_back("climb", worst);
  }
  return r;
}

TrajectoryResult solve_trajectory(const TranscriptionSpec& spec, const VehicleParams& params,
                                  const TrajoptOptions& options) {
  const nlp::NlpProblem prob = build_transcription(spec, params);
  nlp::SolveOptions solver = options.solver;
  if (solver.initial_point.size() == 0) solver.initial_point = initial_guess(spec);
  TrajectoryResult result;
  result.report = nlp::solve(prob, solver);
  result.trajectory = unpack(result.report.solution, spec.knots);
  result.validation = validate_trajectory(result.trajectory, params, &spec);
  result.converged = result.report.status == nlp::SolveStatus::kConverged &&
                     result.validation.max() <= solver.feasibility_tolerance;
  result.trajectory.metadata["status"] = nlp::to_string(result.report.status);
  return result;
}

void write_trajectory(std::ostream& os, const Trajectory& traj) {
  const int t_knots = traj.knots();
  if (t_knots < 0 || traj.states.size() != static_cast<size_t>(t_knots + 2)) {
    throw Error(ErrorCode::kDimensionMismatch, "trajectory needs T+2 states and T+1 inputs");
  }
  os << "# vtauv trajectory\n# format_version 1\n# knots " << t_knots << "\n# time_step ";
  WriteDouble(os, traj.time_step);
  os << "\n# duration ";
  WriteDouble(os, traj.duration());
  os << '\n';
  for (const auto& [key, value] : traj.metadata) os << "# meta " << key << ' ' << value << '\n';
  for (int c = 0; c < kNumColumns; ++c) os << (c ? " " : "") << kColumns[c];
  os << '\n';
  for (int k = 0; k < t_knots + 2; ++k) {
    WriteDouble(os, traj.time(k));
    for (int i = 0; i < 17; ++i) {
      os << ' ';
      WriteDouble(os, traj.states[k][i]);
    }
    for (int i = 0; i < 3; ++i) {
      os << ' ';
      WriteDouble(os, k <= t_knots ? traj.inputs[k][i] : std::nan(""));
    }
    os << '\n';
  }
}

Trajectory read_trajectory(std::istream& is) {
  Trajectory traj;
  int t_knots = -1;
  bool have_h = false, have_header = false;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream in(line.substr(1));
      std::string key;
      in >> key;
      if (key == "knots") {
        in >> t_knots;
      } else if (key == "time_step") {
        std::string v;
        in >> v;
        traj.time_step = ParseDouble(v);
        have_h = true;
      } else if (key == "meta") {
        std::string name, value;
        in >> name;
        std::getline(in >> std::ws, value);
        traj.metadata[name] = value;
      }
      continue;
    }
    if (!have_header) {
      have_header = true;
      continue;
    }
    std::istringstream in(line);
    std::vector<double> row;
    for (std::string tok; in >> tok;) row.push_back(ParseDouble(tok));
    if (row.size() != kNumColumns) {
      throw Error(ErrorCode::kIo, "trajectory row has " + std::to_string(row.size()) + " columns");
    }
    Vector17d x;
    for (int i = 0; i < 17; ++i) x[i] = row[1 + i];
    traj.states.push_back(x);
    traj.inputs.emplace_back(row[18], row[19], row[20]);
  }
  if (t_knots < 2 || !have_h || traj.states.size() != static_cast<size_t>(t_knots + 2)) {
    throw Error(ErrorCode::kIo, "trajectory file is incomplete or inconsistent");
  }
  traj.inputs.pop_back();  // the trailing knot carries no input
  return traj;
}

void save_trajectory(const std::string& path, const Trajectory& traj) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::kIo, "cannot open " + path + " for writing");
  write_trajectory(os, traj);
  if (!os) throw Error(ErrorCode::kIo, "failed writing " + path);
}

Trajectory load_trajectory(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::kIo, "cannot open " + path);
  return read_trajectory(is);
}

}  // namespace vtauv
