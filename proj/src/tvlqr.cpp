#include "vtauv/tvlqr.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "textio.hpp"
#include "vtauv/errors.hpp"

namespace vtauv {
namespace {

using Eigen::MatrixXd;
using textio::ParseDouble;
using textio::WriteDouble;

Eigen::Vector4d Conjugate(const Eigen::Vector4d& q) { return {q[0], -q[1], -q[2], -q[3]}; }

UnitQuaternion UnitAnchor(const FullState& x) { return x.quaternion().normalized(); }

MatrixXd Symmetrized(const MatrixXd& m) { return 0.5 * (m + m.transpose()); }

double MaxRealEigenvalue(const MatrixXd& m) {
  return Eigen::EigenSolver<MatrixXd>(m, false).eigenvalues().real().maxCoeff();
}

double MinSymmetricEigenvalue(const MatrixXd& m) {
  return Eigen::SelfAdjointEigenSolver<MatrixXd>(Symmetrized(m), Eigen::EigenvaluesOnly)
      .eigenvalues()
      .minCoeff();
}

// Solves Acᵀ X + X Ac = −C through the Kronecker form.
MatrixXd SolveLyapunov(const MatrixXd& ac, const MatrixXd& c) {
  const int n = static_cast<int>(ac.rows());
  const MatrixXd eye = MatrixXd::Identity(n, n);
  MatrixXd big = MatrixXd::Zero(n * n, n * n);
  // vec(Acᵀ X) = (I ⊗ Acᵀ) vec X, vec(X Ac) = (Acᵀ ⊗ I) vec X.
  for (int i = 0; i < n; ++i) {
    big.block(i * n, i * n, n, n) += ac.transpose();
    for (int j = 0; j < n; ++j) big.block(i * n, j * n, n, n) += ac(j, i) * eye;
  }
  const Eigen::VectorXd rhs = -Eigen::Map<const Eigen::VectorXd>(c.data(), n * n);
  const Eigen::VectorXd x = big.partialPivLu().solve(rhs);
  return Symmetrized(Eigen::Map<const MatrixXd>(x.data(), n, n));
}

[[noreturn]] void NonStabilizable(const std::string& why) {
  throw Error(ErrorCode::kNonStabilizable, "algebraic Riccati equation: " + why);
}

}  // namespace

Vector16d reduced_error(const FullState& x, const FullState& ref, AttitudeError mode) {
  Vector16d e;
  if (mode == AttitudeError::kMultiplicative) {
    e.head<3>() = quat_error(x.quaternion(), ref.quaternion()).vec;
  } else {
    Eigen::Vector4d q = x.s.head<4>();
    if (q.dot(ref.s.head<4>()) < 0.0) q = -q;
    e.head<3>() = q.tail<3>() - ref.s.segment<3>(1);
  }
  e.segment<5>(3) = x.s.tail<5>() - ref.s.tail<5>();
  e.tail<8>() = x.v - ref.v;
  return e;
}

FullState apply_reduced(const FullState& anchor, const Vector16d& delta) {
  FullState x;
  const UnitQuaternion e = reconstruct(ReducedQuaternion{delta.head<3>()});
  x.set_quaternion(e * UnitAnchor(anchor));
  x.s.tail<5>() = anchor.s.tail<5>() + delta.segment<5>(3);
  x.v = anchor.v + delta.tail<8>();
  return x;
}

Vector16d reduced_dynamics(const VehicleModel& model, const FullState& x_star,
                           const ControlInput& u_star, const Vector16d& delta,
                           const Eigen::Vector3d& du) {
  const FullState anchor = apply_reduced(x_star, Vector16d::Zero());
  const FullState x = apply_reduced(x_star, delta);
  const Vector17d f = state_derivative(model, x.vector(), u_star.vector() + du);
  const Vector17d f_star = state_derivative(model, anchor.vector(), u_star.vector());
  Eigen::Vector4d rate;
  rate << 0.0, x.omega() - anchor.omega();
  const Eigen::Vector4d de = 0.5 * HamiltonProduct<double>(
                                       HamiltonProduct<double>(x.s.head<4>(), rate),
                                       Conjugate(anchor.s.head<4>()));
  Vector16d out;
  out.head<3>() = de.tail<3>();
  out.tail<13>() = f.tail<13>() - f_star.tail<13>();
  return out;
}

LinearizedSystem linearize(const VehicleModel& model, const FullState& x_star,
                           const ControlInput& u_star, double step) {
  if (!(x_star.s[idx::kQw] > 0.0)) {
    throw Error(ErrorCode::kChartSingularity,
                "reduced attitude chart needs q_w > 0 at the anchor (got " +
                    std::to_string(x_star.s[idx::kQw]) + ")");
  }
  LinearizedSystem lin;
  lin.x_star = x_star;
  lin.u_star = u_star;
  const Eigen::Vector3d u0 = u_star.vector();
  for (int j = 0; j < kReducedSize; ++j) {
    Vector16d d = Vector16d::Zero();
    d[j] = step;
    lin.a.col(j) = (reduced_dynamics(model, x_star, u_star, d, Eigen::Vector3d::Zero()) -
                    reduced_dynamics(model, x_star, u_star, -d, Eigen::Vector3d::Zero())) /
                   (2.0 * step);
  }
  for (int j = 0; j < 3; ++j) {
    Eigen::Vector3d du = Eigen::Vector3d::Zero();
    du[j] = step * std::max(1.0, std::abs(u0[j]));
    lin.b.col(j) = (reduced_dynamics(model, x_star, u_star, Vector16d::Zero(), du) -
                    reduced_dynamics(model, x_star, u_star, Vector16d::Zero(), -du)) /
                   (2.0 * du[j]);
  }
  if (!lin.a.allFinite() || !lin.b.allFinite()) {
    throw Error(ErrorCode::kNonFinite, "non-finite linearization");
  }
  return lin;
}

double are_residual(const MatrixXd& a, const MatrixXd& b, const MatrixXd& q, const MatrixXd& r,
                    const MatrixXd& s) {
  const MatrixXd g = b * r.llt().solve(b.transpose());
  const MatrixXd res = s * a + a.transpose() * s - s * g * s + q;
  const double scale = s.norm();
  return scale > 0.0 ? res.norm() / scale : res.norm();
}

AreSolution solve_are(const MatrixXd& a, const MatrixXd& b, const MatrixXd& q, const MatrixXd& r) {
  const int n = static_cast<int>(a.rows());
  const int m = static_cast<int>(b.cols());
  if (a.cols() != n || b.rows() != n || q.rows() != n || q.cols() != n || r.rows() != m ||
      r.cols() != m || n == 0 || m == 0) {
    throw Error(ErrorCode::kDimensionMismatch, "solve_are: inconsistent matrix sizes");
  }
  if (!a.allFinite() || !b.allFinite() || !q.allFinite() || !r.allFinite()) {
    throw Error(ErrorCode::kNonFinite, "solve_are: non-finite input");
  }
  if ((q - q.transpose()).norm() > 1e-12 * std::max(1.0, q.norm()) ||
      MinSymmetricEigenvalue(q) < -1e-10 * std::max(1.0, q.norm())) {
    throw Error(ErrorCode::kInvalidSpec, "solve_are: Q must be symmetric PSD");
  }
  const Eigen::LLT<MatrixXd> r_llt(Symmetrized(r));
  if ((r - r.transpose()).norm() > 1e-12 * r.norm() || r_llt.info() != Eigen::Success) {
    throw Error(ErrorCode::kInvalidSpec, "solve_are: R must be symmetric positive definite");
  }
  const MatrixXd g = b * r_llt.solve(b.transpose());

  // Sign of the Hamiltonian; its stable invariant subspace is span [I; S].
  MatrixXd z(2 * n, 2 * n);
  z << a, -g, -q, -a.transpose();
  bool converged = false;
  for (int it = 0; it < 100 && !converged; ++it) {
    const Eigen::PartialPivLU<MatrixXd> lu(z);
    if (!(lu.rcond() > 1e-14)) NonStabilizable("Hamiltonian has eigenvalues on the imaginary axis");
    const double log_det = lu.matrixLU().diagonal().cwiseAbs().array().log().sum();
    const double c = std::exp(log_det / (2.0 * n));
    const MatrixXd next = 0.5 * (z / c + c * lu.inverse());
    converged = (next - z).lpNorm<1>() <= 1e-12 * next.lpNorm<1>();
    z = next;
  }
  if (!z.allFinite()) NonStabilizable("sign iteration diverged");
  MatrixXd lhs(2 * n, n), rhs(2 * n, n);
  lhs << z.topRightCorner(n, n), z.bottomRightCorner(n, n) + MatrixXd::Identity(n, n);
  rhs << -(z.topLeftCorner(n, n) + MatrixXd::Identity(n, n)), -z.bottomLeftCorner(n, n);
  MatrixXd s = Symmetrized(lhs.colPivHouseholderQr().solve(rhs));

  // Newton-Kleinman polish.
  const double margin = 1e-9 * std::max(1.0, a.norm());
  double residual = are_residual(a, b, q, r, s);
  for (int it = 0; it < 30 && s.allFinite(); ++it) {
    const MatrixXd k = r_llt.solve(b.transpose() * s);
    const MatrixXd ac = a - b * k;
    if (MaxRealEigenvalue(ac) >= -margin) break;
    const MatrixXd next = SolveLyapunov(ac, q + k.transpose() * r * k);
    const double next_residual = are_residual(a, b, q, r, next);
    if (!(next_residual < residual)) break;
    s = next;
    residual = next_residual;
    if (residual <= 1e-14) break;
  }

  AreSolution out;
  out.s = s;
  out.k = r_llt.solve(b.transpose() * s);
  if (!s.allFinite() || !(residual <= 1e-8)) {
    NonStabilizable("residual stalled at " + std::to_string(residual));
  }
  if (MaxRealEigenvalue(a - b * out.k) >= -margin) {
    NonStabilizable("closed loop is not Hurwitz");
  }
  if (MinSymmetricEigenvalue(s) < -1e-8 * std::max(1.0, s.norm())) {
    NonStabilizable("solution is not positive semidefinite");
  }
  return out;
}

DreSolution integrate_dre(const std::vector<double>& grid, const SystemMatrices& system,
                          const MatrixXd& q, const MatrixXd& r, const MatrixXd& s_terminal,
                          const RiccatiOptions& options) {
  if (grid.size() < 2) throw Error(ErrorCode::kDimensionMismatch, "DRE grid needs two points");
  for (size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) {
      throw Error(ErrorCode::kDimensionMismatch, "DRE grid must be increasing");
    }
  }
  if (!(options.max_step > 0.0)) throw Error(ErrorCode::kInvalidSpec, "DRE step must be > 0");
  const Eigen::LLT<MatrixXd> r_llt(r);
  if (r_llt.info() != Eigen::Success) {
    throw Error(ErrorCode::kInvalidSpec, "R must be positive definite");
  }
  auto rhs = [&](double t, const MatrixXd& s) {
    const auto [a, b] = system(t);
    const MatrixXd sb = s * b;
    return MatrixXd(-(s * a + a.transpose() * s - sb * r_llt.solve(sb.transpose()) + q));
  };
  auto gain = [&](double t, const MatrixXd& s) {
    return MatrixXd(r_llt.solve(system(t).second.transpose() * s));
  };

  const size_t n = grid.size();
  DreSolution out;
  out.times = grid;
  out.s.resize(n);
  out.k.resize(n);
  MatrixXd s = Symmetrized(s_terminal);
  out.s[n - 1] = s;
  out.k[n - 1] = gain(grid[n - 1], s);
  for (size_t i = n - 1; i > 0; --i) {
    const double span = grid[i] - grid[i - 1];
    const int steps = std::max(1, static_cast<int>(std::ceil(span / options.max_step - 1e-9)));
    const double dt = span / steps;
    for (int j = 0; j < steps; ++j) {
      const double t = grid[i] - j * dt;
      const MatrixXd k1 = rhs(t, s);
      const MatrixXd k2 = rhs(t - 0.5 * dt, s - 0.5 * dt * k1);
      const MatrixXd k3 = rhs(t - 0.5 * dt, s - 0.5 * dt * k2);
      const MatrixXd k4 = rhs(t - dt, s - dt * k3);
      s = Symmetrized(s - dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
      if (!s.allFinite() || s.norm() > options.blowup_ceiling) {
        std::ostringstream msg;
        msg << "Riccati solution blew up near t = " << t - dt << " s (|S| = " << s.norm()
            << ", ceiling " << options.blowup_ceiling << ")";
        throw Error(ErrorCode::kRiccatiBlowUp, msg.str());
      }
    }
    out.s[i - 1] = s;
    out.k[i - 1] = gain(grid[i - 1], s);
  }
  return out;
}

Matrix3x16d GainSchedule::gain_at(double t) const {
  if (times.empty() || t > times.back()) return k_inf;
  if (t <= times.front()) return k.front();
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  const size_t i = static_cast<size_t>(it - times.begin());
  if (i >= times.size()) return k.back();
  const double s = (t - times[i - 1]) / (times[i] - times[i - 1]);
  return (1.0 - s) * k[i - 1] + s * k[i];
}

Matrix16d DefaultStateWeight() {
  Vector16d d;
  d << Eigen::Vector3d::Constant(10.0), Eigen::Vector3d::Constant(100.0),
      Eigen::Matrix<double, 10, 1>::Ones();
  return d.asDiagonal();
}

Eigen::Matrix3d DefaultInputWeight() { return Eigen::Vector3d(0.01, 1.0, 1.0).asDiagonal(); }

std::vector<LinearizedSystem> linearize_trajectory(const VehicleModel& model,
                                                   const Trajectory& reference, double step) {
  std::vector<LinearizedSystem> lins;
  const int t_knots = reference.knots();
  lins.reserve(t_knots + 1);
  for (int k = 0; k <= t_knots; ++k) {
    FullState x = FullState::FromVector(reference.states[k]);
    if (x.s[idx::kQw] < 0.0) x.s.head<4>() = -x.s.head<4>();
    LinearizedSystem lin = linearize(model, x, ControlInput::FromVector(reference.inputs[k]), step);
    lin.time = reference.time(k);
    lins.push_back(lin);
  }
  return lins;
}

SystemMatrices interpolate_linearizations(const std::vector<LinearizedSystem>& lins) {
  if (lins.empty()) throw Error(ErrorCode::kDimensionMismatch, "no linearizations");
  return [lins](double t) {
    auto pair = [](const LinearizedSystem& l) {
      return std::make_pair(MatrixXd(l.a), MatrixXd(l.b));
    };
    if (t <= lins.front().time) return pair(lins.front());
    if (t >= lins.back().time) return pair(lins.back());
    const auto it = std::upper_bound(lins.begin(), lins.end(), t,
                                     [](double v, const LinearizedSystem& l) { return v < l.time; });
    const LinearizedSystem& hi = *it;
    const LinearizedSystem& lo = *(it - 1);
    const double s = (t - lo.time) / (hi.time - lo.time);
    return std::make_pair(MatrixXd((1.0 - s) * lo.a + s * hi.a),
                          MatrixXd((1.0 - s) * lo.b + s * hi.b));
  };
}

GainSchedule solve_dre(const std::vector<LinearizedSystem>& lins, const Matrix16d& q,
                       const Eigen::Matrix3d& r, const Matrix16d& s_terminal,
                       const Matrix16d& s_inf, const Matrix3x16d& k_inf,
                       const RiccatiOptions& options) {
  std::vector<double> grid;
  for (const LinearizedSystem& l : lins) grid.push_back(l.time);
  const DreSolution dre =
      integrate_dre(grid, interpolate_linearizations(lins), q, r, s_terminal, options);
  GainSchedule out;
  out.times = grid;
  for (size_t i = 0; i < grid.size(); ++i) {
    out.s.push_back(dre.s[i]);
    out.k.push_back(dre.k[i]);
  }
  out.s_inf = s_inf;
  out.k_inf = k_inf;
  out.q = q;
  out.r = r;
  return out;
}

GainSchedule synthesize_gains(const VehicleModel& model, const Trajectory& reference,
                              const TvlqrOptions& options) {
  const std::vector<LinearizedSystem> lins =
      linearize_trajectory(model, reference, options.fd_step);
  const LinearizedSystem& last = lins.back();
  Matrix16d s_inf = options.terminal_weight.value_or(options.q);
  Matrix3x16d k_inf = options.r.llt().solve(last.b.transpose() * s_inf);
  std::string terminal = "weight";
  std::string reason;
  if (options.seed_with_are) {
    try {
      const AreSolution are = solve_are(last.a, last.b, options.q, options.r);
      s_inf = are.s;
      k_inf = are.k;
      terminal = "are";
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNonStabilizable) throw;
      terminal = "fallback";
      reason = e.what();
    }
  }
  GainSchedule out = solve_dre(lins, options.q, options.r, s_inf, s_inf, k_inf, options.riccati);
  out.metadata["terminal"] = terminal;
  if (!reason.empty()) out.metadata["terminal_reason"] = reason;
  return out;
}

ControlOutput control(const GainSchedule& schedule, const Trajectory& reference,
                      const VehicleParams& params, const FullState& x, double t,
                      AttitudeError mode) {
  const double d = reference.duration();
  const bool after = t > d;
  const double tr = after ? d : t;
  const FullState ref = reference.state_at(tr);
  const ControlInput u_ref = reference.input_at(tr);
  ControlOutput out;
  out.error = reduced_error(x, ref, mode);
  const Matrix3x16d k = after ? schedule.k_inf : schedule.gain_at(t);
  const Eigen::Vector3d u = u_ref.vector() - k * out.error;
  out.input = ControlInput::FromVector(u);
  out.input.force = params.force_limits.clamp(u[0]);
  out.saturated = out.input.force != u[0];
  return out;
}

namespace {

template <typename Derived>
void WriteRow(std::ostream& os, const char* key, const Eigen::MatrixBase<Derived>& m) {
  os << "# " << key;
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) {
      os << ' ';
      WriteDouble(os, m(i, j));
    }
  }
  os << '\n';
}

template <int R, int C>
Eigen::Matrix<double, R, C> ReadMatrix(std::istream& in) {
  Eigen::Matrix<double, R, C> m;
  for (int i = 0; i < R; ++i) {
    for (int j = 0; j < C; ++j) {
      std::string tok;
      if (!(in >> tok)) throw Error(ErrorCode::kIo, "gain schedule: truncated matrix");
      m(i, j) = ParseDouble(tok);
    }
  }
  return m;
}

}  // namespace

void write_gain_schedule(std::ostream& os, const GainSchedule& schedule, bool include_s) {
  const size_t n = schedule.times.size();
  if (n == 0 || schedule.k.size() != n || (include_s && schedule.s.size() != n)) {
    throw Error(ErrorCode::kDimensionMismatch, "gain schedule sizes are inconsistent");
  }
  os << "# vtauv gain schedule\n# format_version 1\n# points " << n << "\n# include_s "
     << (include_s ? 1 : 0) << '\n';
  for (const auto& [key, value] : schedule.metadata) os << "# meta " << key << ' ' << value << '\n';
  WriteRow(os, "Q", schedule.q);
  WriteRow(os, "R", schedule.r);
  WriteRow(os, "S_inf", schedule.s_inf);
  WriteRow(os, "K_inf", schedule.k_inf);
  os << "time[s]";
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < kReducedSize; ++j) os << " K_" << i << '_' << j;
  }
  if (include_s) {
    for (int i = 0; i < kReducedSize; ++i) {
      for (int j = 0; j < kReducedSize; ++j) os << " S_" << i << '_' << j;
    }
  }
  os << '\n';
  for (size_t p = 0; p < n; ++p) {
    WriteDouble(os, schedule.times[p]);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < kReducedSize; ++j) {
        os << ' ';
        WriteDouble(os, schedule.k[p](i, j));
      }
    }
    if (include_s) {
      for (int i = 0; i < kReducedSize; ++i) {
        for (int j = 0; j < kReducedSize; ++j) {
          os << ' ';
          WriteDouble(os, schedule.s[p](i, j));
        }
      }
    }
    os << '\n';
  }
}

GainSchedule read_gain_schedule(std::istream& is) {
  GainSchedule out;
  long points = -1;
  int include_s = -1;
  int found = 0;
  bool have_header = false;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream in(line.substr(1));
      std::string key;
      in >> key;
      if (key == "points") {
        in >> points;
      } else if (key == "include_s") {
        in >> include_s;
      } else if (key == "meta") {
        std::string name, value;
        in >> name;
        std::getline(in >> std::ws, value);
        out.metadata[name] = value;
      } else if (key == "Q") {
        out.q = ReadMatrix<16, 16>(in);
        ++found;
      } else if (key == "R") {
        out.r = ReadMatrix<3, 3>(in);
        ++found;
      } else if (key == "S_inf") {
        out.s_inf = ReadMatrix<16, 16>(in);
        ++found;
      } else if (key == "K_inf") {
        out.k_inf = ReadMatrix<3, 16>(in);
        ++found;
      }
      continue;
    }
    if (!have_header) {
      have_header = true;
      continue;
    }
    const size_t columns = 1 + 48 + (include_s == 1 ? 256 : 0);
    std::istringstream in(line);
    std::vector<double> row;
    for (std::string tok; in >> tok;) row.push_back(ParseDouble(tok));
    if (row.size() != columns) {
      throw Error(ErrorCode::kIo, "gain schedule row has " + std::to_string(row.size()) +
                                      " columns, expected " + std::to_string(columns));
    }
    out.times.push_back(row[0]);
    out.k.push_back(Eigen::Map<const Eigen::Matrix<double, 3, 16, Eigen::RowMajor>>(&row[1]));
    if (include_s == 1) {
      out.s.push_back(Eigen::Map<const Eigen::Matrix<double, 16, 16, Eigen::RowMajor>>(&row[49]));
    }
  }
  if (points < 1 || (include_s != 0 && include_s != 1) || found != 4 ||
      out.times.size() != static_cast<size_t>(points)) {
    throw Error(ErrorCode::kIo, "gain schedule file is incomplete or inconsistent");
  }
  return out;
}

void save_gain_schedule(const std::string& path, const GainSchedule& schedule, bool include_s) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::kIo, "cannot open " + path + " for writing");
  write_gain_schedule(os, schedule, include_s);
  if (!os) throw Error(ErrorCode::kIo, "failed writing " + path);
}

GainSchedule load_gain_schedule(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::kIo, "cannot open " + path);
  return read_gain_schedule(is);
}

}  // namespace vtauv
