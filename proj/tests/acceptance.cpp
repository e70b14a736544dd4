// Acceptance run: plans, stabilizes and simulates the three built-in
// maneuvers and checks the ten acceptance criteria. Prints one PASS/FAIL line
// per criterion on stdout and exits non-zero if any criterion fails.

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "vtauv/config.hpp"
#include "vtauv/errors.hpp"
#include "vtauv/nlp.hpp"
#include "vtauv/pipeline.hpp"
#include "vtauv/scenario.hpp"
#include "vtauv/sim.hpp"
#include "vtauv/trajopt.hpp"
#include "vtauv/tvlqr.hpp"
#include "vtauv/vehicle.hpp"

namespace fs = std::filesystem;
using namespace vtauv;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDeg = 180.0 / kPi;
const char* kScenarios[] = {"polebalancing", "quarterhelix", "steep-elevation"};

double Seconds(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string Fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

class Rng {
 public:
  explicit Rng(unsigned seed) : e_(seed) {}
  double uniform(double lo, double hi) { return std::uniform_real_distribution<>(lo, hi)(e_); }
  double normal() { return std::normal_distribution<>()(e_); }
  template <int N>
  Eigen::Matrix<double, N, 1> vec(double lo, double hi) {
    Eigen::Matrix<double, N, 1> v;
    for (int i = 0; i < N; ++i) v[i] = uniform(lo, hi);
    return v;
  }
  UnitQuaternion quaternion() {
    Eigen::Vector4d c(normal(), normal(), normal(), normal());
    c.normalize();
    if (c[0] < 0.0) c = -c;
    return UnitQuaternion(c);
  }

 private:
  std::mt19937 e_;
};

struct Run {
  std::string dir;
  ScenarioSpec spec;
  VehicleParams params;  // with the scenario's force limits
  Trajectory traj;
  GainSchedule gains;
  RunManifest manifest;
};

struct Criterion {
  int id;
  std::string title;
  bool pass = true;
  std::string detail;

  void check(bool ok, const std::string& what) {
    if (!ok) pass = false;
    detail += (detail.empty() ? "" : "; ") + std::string(ok ? "" : "FAILED ") + what;
  }
};

void Print(const Criterion& c) {
  std::cout << (c.pass ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.title
            << "): " << c.detail << std::endl;
}

double Pitch(const Vector17d& x) {
  return yaw_pitch_roll(FullState::FromVector(x).quaternion().normalized())[1];
}

double Yaw(const Vector17d& x) {
  return yaw_pitch_roll(FullState::FromVector(x).quaternion().normalized())[0];
}

// 1 -------------------------------------------------------------------------
Criterion ConstraintFidelity(const std::map<std::string, Run>& runs) {
  Criterion c{1, "constraint fidelity"};
  const VehicleParams vehicle = DefaultVehicleParams();
  for (const char* name : {"quarterhelix", "steep-elevation"}) {
    const Run& r = runs.at(name);
    double worst = 0.0;
    for (const Eigen::Vector3d& u : r.traj.inputs) worst = std::max(worst, std::abs(u[0]));
    const double excess = validate_trajectory(r.traj, vehicle).get("force_limit");
    c.check(worst <= vehicle.force_limits.max && excess == 0.0,
            std::string(name) + " max |f| = " + Fmt("%.4g", worst) + " N");
  }
  const Run& pole = runs.at("polebalancing");
  c.check(pole.manifest.stage("optimize")->status == "converged",
          "polebalancing converged at " + Fmt("%.0f", pole.params.force_limits.max) + " N");

  TranscriptionSpec tight = pole.spec.transcription;
  tight.force_limits.reset();
  const auto t0 = std::chrono::steady_clock::now();
  const TrajectoryResult r = solve_trajectory(tight, vehicle);
  const double t_tight = Seconds(t0);
  c.check(!r.converged, "polebalancing at 70 N: " + nlp::to_string(r.report.status));

  double slowest = t_tight;
  for (const auto& [name, run] : runs) slowest = std::max(slowest, run.manifest.stage("optimize")->wall_time);
  c.check(slowest < 300.0, "slowest solve " + Fmt("%.1f", slowest) + " s");
  return c;
}

// 2 -------------------------------------------------------------------------
Criterion QuaternionEnvelope(const std::map<std::string, Run>& runs) {
  Criterion c{2, "quaternion envelope"};
  double lo = 2.0, hi = 0.0;
  for (const auto& [name, run] : runs) {
    for (const Vector17d& x : run.traj.states) {
      lo = std::min(lo, x.head<4>().norm());
      hi = std::max(hi, x.head<4>().norm());
    }
  }
  c.check(lo >= 0.999 && hi <= 1.001,
          "knot norms in [" + Fmt("%.6f", lo) + ", " + Fmt("%.6f", hi) + "]");

  Rng rng(20);
  const VehicleModel model(DefaultVehicleParams());
  double drift = 0.0;
  int steps = 0;
  for (int trial = 0; trial < 3; ++trial) {
    FullState x;
    x.set_quaternion(rng.quaternion());
    x.v = rng.vec<8>(-1.0, 1.0);
    const ControlInput u{rng.uniform(-70, 70), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    for (int i = 0; i < 10000; ++i, ++steps) {
      x = step(model, x, u, 0.002);
      drift = std::max(drift, std::abs(x.quaternion().norm() - 1.0));
    }
  }
  for (const auto& [name, run] : runs) {
    const SimLog log = load_sim_log(run.dir + "/closed_loop.txt");
    for (const Vector17d& x : log.states) drift = std::max(drift, std::abs(x.head<4>().norm() - 1.0));
  }
  c.check(drift <= 1e-6, "simulator |q| drift " + Fmt("%.2e", drift) + " over " +
                             std::to_string(steps) + " steps plus closed-loop logs");
  return c;
}

// 3 -------------------------------------------------------------------------
// Implicit Euler defects rebuilt from the rotation matrix and the equation of
// motion rather than from the transcription.
Criterion DynamicsDefects(const std::map<std::string, Run>& runs) {
  Criterion c{3, "dynamics-defect oracle"};
  for (const auto& [name, run] : runs) {
    const VehicleModel model(run.params);
    const Trajectory& t = run.traj;
    double worst = 0.0;
    for (int k = 0; k <= t.knots(); ++k) {
      const FullState a = FullState::FromVector(t.states[k]);
      const FullState b = FullState::FromVector(t.states[k + 1]);
      const ControlInput u = ControlInput::FromVector(t.inputs[k]);
      const double h = t.time_step;
      const UnitQuaternion qb = b.quaternion();
      const Eigen::Quaterniond qe(qb.w(), qb.x(), qb.y(), qb.z());
      const Eigen::Vector3d pos =
          b.position() - a.position() - h * qe.normalized().toRotationMatrix() * b.linear_velocity();
      const Eigen::Quaterniond w(0.0, b.omega()[0], b.omega()[1], b.omega()[2]);
      const double k_stab = run.params.quaternion_stabilization;
      const Eigen::Vector4d qdot = 0.5 * Eigen::Vector4d((qe * w).w(), (qe * w).x(), (qe * w).y(),
                                                         (qe * w).z()) +
                                   k_stab * (1.0 - qb.coeffs.squaredNorm()) * qb.coeffs;
      const Eigen::Vector4d quat = qb.coeffs - a.quaternion().coeffs - h * qdot;
      const Eigen::Vector2d ang = b.s.segment<2>(idx::kPsi) - a.s.segment<2>(idx::kPsi) - h * b.v.tail<2>();
      const Vector8d vel = b.v - a.v - h * forward_dynamics(model, b, u);
      worst = std::max({worst, pos.cwiseAbs().maxCoeff(), quat.cwiseAbs().maxCoeff(),
                        ang.cwiseAbs().maxCoeff(), vel.cwiseAbs().maxCoeff()});
    }
    c.check(worst <= 1e-6, name + " " + Fmt("%.2e", worst));
  }
  return c;
}

// 4 -------------------------------------------------------------------------
Criterion ManeuverSemantics(const std::map<std::string, Run>& runs) {
  Criterion c{4, "maneuver semantics"};
  {
    const Trajectory& t = runs.at("quarterhelix").traj;
    double dyaw = (Yaw(t.states[t.knots()]) - Yaw(t.states[0])) * kDeg;
    dyaw = std::remainder(dyaw, 360.0);
    c.check(std::abs(dyaw - 90.0) <= 1.0, "quarterhelix yaw change " + Fmt("%.4f", dyaw) + " deg");
  }
  {
    const Run& r = runs.at("polebalancing");
    const Trajectory& t = r.traj;
    const double final_pitch = -Pitch(t.states[t.knots()]) * kDeg;
    double worst = 0.0;
    for (int k = t.knots() - r.spec.transcription.hold_knots; k <= t.knots(); ++k) {
      worst = std::max(worst, std::abs(-Pitch(t.states[k]) * kDeg - 90.0));
    }
    c.check(std::abs(final_pitch - 90.0) <= 2.0 && worst <= 2.0,
            "polebalancing nose-up pitch " + Fmt("%.4f", final_pitch) + " deg, hold of " +
                std::to_string(r.spec.transcription.hold_knots) + " knots within " +
                Fmt("%.2e", worst) + " deg");
  }
  {
    const Run& r = runs.at("steep-elevation");
    const Trajectory& t = r.traj;
    const Interval box = *r.spec.transcription.lateral_limits;
    const double tol = nlp::SolveOptions{}.feasibility_tolerance;
    double min_dz = std::numeric_limits<double>::infinity(), lateral = 0.0;
    for (int k = 0; k < t.knots(); ++k) {
      min_dz = std::min(min_dz, t.states[k + 1][idx::kPos + 2] - t.states[k][idx::kPos + 2]);
    }
    bool inside = true;
    for (int k = 0; k <= t.knots(); ++k) {
      for (int i : {0, 1}) {
        const double p = t.states[k][idx::kPos + i];
        lateral = std::max(lateral, std::abs(p));
        inside = inside && p <= box.max + tol && p >= box.min - tol;
      }
    }
    c.check(min_dz > 0.0 && inside, "steep-elevation min dz " + Fmt("%.4g", min_dz) +
                                        " m, lateral " + Fmt("%.6f", lateral) + " m (bound " +
                                        Fmt("%.3g", box.max) + ")");
  }
  return c;
}

// 5 -------------------------------------------------------------------------
// Second differencing scheme: fourth-order five-point stencil on the error
// dynamics, step 1e-3.
template <typename F>
MatrixXd FivePoint(F f, int n, double step) {
  MatrixXd out(16, n);
  for (int j = 0; j < n; ++j) {
    auto at = [&](double s) { return f(j, s); };
    out.col(j) = (-at(2 * step) + 8 * at(step) - 8 * at(-step) + at(-2 * step)) / (12 * step);
  }
  return out;
}

Criterion Linearization() {
  Criterion c{5, "linearization check"};
  Rng rng(5);
  const VehicleModel model(DefaultVehicleParams());
  double worst = 0.0, min_order = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 100; ++i) {
    FullState x;
    x.set_quaternion(rng.quaternion());
    x.set_position(rng.vec<3>(-5, 5));
    x.s[idx::kPsi] = rng.uniform(-0.5, 0.5);
    x.s[idx::kPhi] = rng.uniform(-0.5, 0.5);
    x.v = rng.vec<8>(-1, 1);
    const ControlInput u{rng.uniform(-70, 70), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const LinearizedSystem lin = linearize(model, x, u);
    const MatrixXd a = FivePoint(
        [&](int j, double s) {
          Vector16d d = Vector16d::Zero();
          d[j] = s;
          return Vector16d(reduced_dynamics(model, x, u, d, Eigen::Vector3d::Zero()));
        },
        16, 1e-3);
    const MatrixXd b = FivePoint(
        [&](int j, double s) {
          Eigen::Vector3d du = Eigen::Vector3d::Zero();
          du[j] = s;
          return Vector16d(reduced_dynamics(model, x, u, Vector16d::Zero(), du));
        },
        3, 1e-3);
    auto rel = [](const MatrixXd& p, const MatrixXd& q) {
      return ((p - q).cwiseAbs().array() / p.cwiseAbs().array().max(1.0)).maxCoeff();
    };
    worst = std::max({worst, rel(lin.a, a), rel(lin.b, b)});

    Vector16d d;
    for (int k = 0; k < 16; ++k) d[k] = rng.normal();
    d.normalize();
    const Eigen::Vector3d du = rng.vec<3>(-1, 1);
    auto remainder = [&](double eps) {
      return (reduced_dynamics(model, x, u, eps * d, eps * du) - eps * (lin.a * d + lin.b * du)).norm();
    };
    // Richardson order from halving the offset.
    min_order = std::min(min_order, std::log2(remainder(2e-3) / remainder(1e-3)));
  }
  c.check(worst < 1e-4, "max relative A/B discrepancy " + Fmt("%.2e", worst) + " over 100 anchors");
  c.check(min_order >= 1.8, "minimum Taylor remainder order " + Fmt("%.3f", min_order));
  return c;
}

// 6 -------------------------------------------------------------------------
SystemMatrices ConstantSystem(const MatrixXd& a, const MatrixXd& b) {
  return [a, b](double) { return std::make_pair(a, b); };
}

std::vector<double> Grid(double d, int n) {
  std::vector<double> g;
  for (int i = 0; i <= n; ++i) g.push_back(d * i / n);
  return g;
}

Criterion Riccati(const std::map<std::string, Run>& runs) {
  Criterion c{6, "ARE/DRE correctness"};
  double residual = 0.0;
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + trial % 5, m = 1 + trial % 2;
    MatrixXd a(n, n), b(n, m);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) a(i, j) = rng.normal();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) b(i, j) = rng.normal();
    const MatrixXd q = MatrixXd::Identity(n, n), r = MatrixXd::Identity(m, m);
    residual = std::max(residual, are_residual(a, b, q, r, solve_are(a, b, q, r).s));
  }
  const GainSchedule& g = runs.at("quarterhelix").gains;
  const VehicleModel model(runs.at("quarterhelix").params);
  const Trajectory& t = runs.at("quarterhelix").traj;
  const LinearizedSystem lin = linearize(model, FullState::FromVector(t.states[t.knots()]),
                                         ControlInput::FromVector(t.inputs[t.knots()]));
  residual = std::max(residual, are_residual(lin.a, lin.b, g.q, g.r, g.s_inf));
  c.check(residual <= 1e-8, "max ARE residual " + Fmt("%.2e", residual));

  MatrixXd a2(2, 2), b2(2, 1);
  a2 << 0, 1, 0, 0;
  b2 << 0, 1;
  const MatrixXd i2 = MatrixXd::Identity(2, 2), one = MatrixXd::Ones(1, 1);
  const AreSolution di = solve_are(a2, b2, i2, one);
  const double gain_err = std::max(std::abs(di.k(0, 0) - 1.0), std::abs(di.k(0, 1) - std::sqrt(3.0)));
  c.check(gain_err <= 1e-6, "double-integrator gain error " + Fmt("%.2e", gain_err));

  const double d = 5.0, s_t = 2.0;
  const DreSolution scalar = integrate_dre(Grid(d, 20), ConstantSystem(MatrixXd::Zero(1, 1), one),
                                           MatrixXd::Zero(1, 1), one, MatrixXd::Constant(1, 1, s_t));
  double scalar_err = 0.0;
  for (size_t i = 0; i < scalar.times.size(); ++i) {
    scalar_err = std::max(scalar_err,
                          std::abs(scalar.s[i](0, 0) - s_t / (1.0 + s_t * (d - scalar.times[i]))));
  }
  c.check(scalar_err <= 1e-6, "scalar DRE closed-form error " + Fmt("%.2e", scalar_err));

  const DreSolution fixed = integrate_dre(Grid(10.0, 10), ConstantSystem(a2, b2), i2, one, di.s);
  double drift = 0.0;
  for (const MatrixXd& s : fixed.s) drift = std::max(drift, (s - di.s).cwiseAbs().maxCoeff());
  c.check(drift <= 1e-7, "time-invariant DRE drift from S_inf " + Fmt("%.2e", drift));
  return c;
}

// 7 -------------------------------------------------------------------------
Criterion ModelProperties() {
  Criterion c{7, "model properties"};
  Rng rng(7);
  const VehicleParams p = DefaultVehicleParams();
  double work = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Vector8d v = rng.vec<8>(-2, 2);
    work = std::max(work, std::abs(v.dot(coriolis_matrix(p, v) * v)));
  }
  c.check(work <= 1e-10, "max |v'C(v)v| " + Fmt("%.2e", work));

  VehicleParams neutral = p;
  neutral.center_of_gravity = neutral.center_of_buoyancy;
  const VehicleModel model(neutral);
  double rise = -std::numeric_limits<double>::infinity();
  for (int trial = 0; trial < 5; ++trial) {
    FullState x;
    x.set_quaternion(rng.quaternion());
    x.v = rng.vec<8>(-1, 1);
    double e = kinetic_energy(model, x.v);
    for (int i = 0; i < 5000; ++i) {  // 10 s
      x = step(model, x, {}, 0.002);
      const double e1 = kinetic_energy(model, x.v);
      rise = std::max(rise, e1 - e);
      e = e1;
    }
  }
  c.check(rise <= 1e-12, "coincident centers: largest per-step kinetic energy change " +
                             Fmt("%.2e", rise) + " J");

  // Default vehicle (separated centers): kinetic plus gravity/buoyancy
  // potential W e_z'R(r_g - r_b).
  const VehicleModel plant(p);
  auto energy = [&](const FullState& x) {
    const UnitQuaternion q = x.quaternion();
    const Eigen::Matrix3d rot =
        Eigen::Quaterniond(q.w(), q.x(), q.y(), q.z()).normalized().toRotationMatrix();
    return kinetic_energy(plant, x.v) +
           p.weight_force * (rot * (p.center_of_gravity - p.center_of_buoyancy))[2];
  };
  double total_rise = -std::numeric_limits<double>::infinity();
  for (int trial = 0; trial < 5; ++trial) {
    FullState x;
    x.set_quaternion(rng.quaternion());
    x.v = rng.vec<8>(-1, 1);
    double e = energy(x);
    for (int i = 0; i < 5000; ++i) {
      x = step(plant, x, {}, 0.002);
      const double e1 = energy(x);
      total_rise = std::max(total_rise, e1 - e);
      e = e1;
    }
  }
  c.check(total_rise <= 1e-9, "separated centers: largest per-step mechanical energy change " +
                                  Fmt("%.2e", total_rise) + " J");

  double force = 0.0;
  for (int i = 0; i < 100; ++i) {
    force = std::max(force, restoring_wrench(p, rng.quaternion()).segment<3>(3).cwiseAbs().maxCoeff());
  }
  c.check(force == 0.0, "restoring force components " + Fmt("%.1e", force));
  return c;
}

// 8 -------------------------------------------------------------------------
Criterion ClosedLoopBenefit(const std::map<std::string, Run>& runs, double pipeline_seconds) {
  Criterion c{8, "closed-loop benefit"};
  for (const auto& [name, run] : runs) {
    const nlohmann::json m = read_json_file(run.dir + "/metrics.json");
    const double open = m["nominal"]["open_loop"]["final_position_error_m"].get<double>();
    const double closed = m["nominal"]["closed_loop"]["final_position_error_m"].get<double>();
    double worst = m["perturbed"]["final_position_error_ratio"].get<double>();
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      SimConfig cfg = run.spec.sim;
      cfg.random_perturbation = 0.05;
      cfg.seed = seed;
      const double o = tracking_metrics(rollout_open_loop(run.params, run.traj, cfg)).final_position_error;
      const double k =
          tracking_metrics(rollout_closed_loop(run.params, run.traj, run.gains, cfg)).final_position_error;
      worst = std::max(worst, k / o);
    }
    const double open_norm = m["nominal"]["open_loop"]["final_error_norm"].get<double>();
    const double closed_norm = m["nominal"]["closed_loop"]["final_error_norm"].get<double>();
    c.check(closed_norm <= open_norm,
            name + " nominal reduced error " + Fmt("%.3f", closed_norm) + "/" + Fmt("%.3f", open_norm));
    c.check(closed <= open && worst <= 0.5,
            name + " nominal " + Fmt("%.3f", closed) + "/" + Fmt("%.3f", open) +
                " m, worst perturbed ratio " + Fmt("%.3f", worst));
  }
  c.check(pipeline_seconds < 900.0, "pipeline " + Fmt("%.1f", pipeline_seconds) + " s");
  return c;
}

// 9 -------------------------------------------------------------------------
nlp::NlpProblem Qp(const MatrixXd& p, const VectorXd& q, const MatrixXd& a, const VectorXd& b) {
  nlp::NlpProblem prob;
  prob.num_variables = static_cast<int>(q.size());
  prob.num_equalities = static_cast<int>(b.size());
  prob.objective = [p, q](const VectorXd& z, VectorXd* g) {
    if (g) *g = p * z + q;
    return 0.5 * z.dot(p * z) + q.dot(z);
  };
  prob.equalities = [a, b](const VectorXd& z, VectorXd& cz, nlp::SparseMatrix* j) {
    cz = a * z - b;
    if (j) *j = a.sparseView();
  };
  prob.objective_hessian = [p](const VectorXd&) { return nlp::SparseMatrix(p.sparseView()); };
  const double inf = std::numeric_limits<double>::infinity();
  prob.lower = VectorXd::Constant(q.size(), -inf);
  prob.upper = VectorXd::Constant(q.size(), inf);
  return prob;
}

Criterion SolverSanity(const std::map<std::string, Run>& runs) {
  Criterion c{9, "NLP solver sanity"};
  Rng rng(9);
  double worst = 0.0;
  bool all_converged = true;
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 4 + trial % 7, m = 1 + trial % 3;
    MatrixXd l(n, n), a(m, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) l(i, j) = rng.normal();
    const MatrixXd p = l * l.transpose() + MatrixXd::Identity(n, n);
    VectorXd q(n), b(m);
    for (int i = 0; i < n; ++i) q[i] = rng.normal();
    for (int i = 0; i < m; ++i) {
      b[i] = rng.normal();
      for (int j = 0; j < n; ++j) a(i, j) = rng.normal();
    }
    MatrixXd kkt = MatrixXd::Zero(n + m, n + m);
    kkt.topLeftCorner(n, n) = p;
    kkt.topRightCorner(n, m) = a.transpose();
    kkt.bottomLeftCorner(m, n) = a;
    VectorXd rhs(n + m);
    rhs << -q, b;
    const VectorXd exact = kkt.fullPivLu().solve(rhs);
    nlp::SolveOptions o;
    o.feasibility_tolerance = 1e-9;
    o.optimality_tolerance = 1e-9;
    const nlp::SolveReport r = nlp::solve(Qp(p, q, a, b), o);
    all_converged = all_converged && r.status == nlp::SolveStatus::kConverged;
    worst = std::max(worst, (r.solution - exact.head(n)).cwiseAbs().maxCoeff());
  }
  c.check(all_converged && worst <= 1e-6, "20 equality QPs, max error " + Fmt("%.2e", worst));

  double grad = 0.0;
  for (const auto& [name, run] : runs) {
    const nlp::NlpProblem prob = build_transcription(run.spec.transcription, run.params);
    grad = std::max(grad, nlp::check_gradients(prob, pack(run.traj)));
  }
  c.check(grad < 1e-5, "transcription gradient check " + Fmt("%.2e", grad));
  return c;
}

// 10 ------------------------------------------------------------------------
std::string Bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

Criterion Determinism(const std::map<std::string, Run>& runs, const std::string& base) {
  Criterion c{10, "determinism and round-trip"};
  const RunConfig rc;
  bool same = true;
  for (const char* name : kScenarios) {
    const std::string dir = base + "/repeat/" + name;
    const RunManifest again = run_pipeline(rc, name, dir);
    same = same && again.digests == runs.at(name).manifest.digests && verify_run(dir).ok();
  }
  c.check(same, "repeated runs give identical digests for all output files");

  bool exact = true;
  for (const auto& [name, run] : runs) {
    std::ostringstream t, g;
    write_trajectory(t, run.traj);
    write_gain_schedule(g, run.gains);
    exact = exact && t.str() == Bytes(run.dir + "/trajectory.txt") &&
            g.str() == Bytes(run.dir + "/gains.txt");
    std::istringstream ti(t.str()), gi(g.str());
    const Trajectory t2 = read_trajectory(ti);
    const GainSchedule g2 = read_gain_schedule(gi);
    for (size_t k = 0; k < t2.states.size(); ++k) exact = exact && t2.states[k] == run.traj.states[k];
    for (size_t k = 0; k < g2.k.size(); ++k) exact = exact && g2.k[k] == run.gains.k[k];
    exact = exact && t2.time_step == run.traj.time_step;
  }
  c.check(exact, "trajectory and gain files round-trip bit-exactly");
  return c;
}

}  // namespace

int main() {
  const std::string base =
      (fs::temp_directory_path() / ("vtauv_acceptance_" + std::to_string(::getpid()))).string();
  fs::remove_all(base);
  std::vector<Criterion> results;
  try {
    const RunConfig rc;
    std::map<std::string, Run> runs;
    const auto t0 = std::chrono::steady_clock::now();
    for (const char* name : kScenarios) {
      Run r;
      r.dir = base + "/" + name;
      r.spec = rc.resolve(name);
      r.params = rc.vehicle;
      r.params.force_limits = r.spec.transcription.effective_force_limits(rc.vehicle);
      r.manifest = run_pipeline(rc, name, r.dir);
      r.traj = load_trajectory(r.dir + "/trajectory.txt");
      r.gains = load_gain_schedule(r.dir + "/gains.txt");
      runs.emplace(name, std::move(r));
    }
    const double pipeline_seconds = Seconds(t0);

    results.push_back(ConstraintFidelity(runs));
    results.push_back(QuaternionEnvelope(runs));
    results.push_back(DynamicsDefects(runs));
    results.push_back(ManeuverSemantics(runs));
    results.push_back(Linearization());
    results.push_back(Riccati(runs));
    results.push_back(ModelProperties());
    results.push_back(ClosedLoopBenefit(runs, pipeline_seconds));
    results.push_back(SolverSanity(runs));
    results.push_back(Determinism(runs, base));
  } catch (const std::exception& e) {
    std::cout << "FAIL acceptance run aborted: " << e.what() << std::endl;
    fs::remove_all(base);
    return 1;
  }
  bool ok = true;
  for (const Criterion& c : results) {
    Print(c);
    ok = ok && c.pass;
  }
  fs::remove_all(base);
  return ok ? 0 : 1;
}
