#include "vtauv/nlp.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <vector>

#include "vtauv/errors.hpp"

namespace vtauv::nlp {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Eval {
  double f = 0.0;
  VectorXd grad;
  VectorXd c;
  VectorXd g;
  SparseMatrix jc;
  SparseMatrix jg;
};

void RequireFinite(const VectorXd& v, const char* what) {
  if (!v.allFinite()) {
    throw Error(ErrorCode::kCallbackFailure, std::string(what) + " returned a non-finite value");
  }
}

void RequireSize(Eigen::Index got, int want, const char* what) {
  if (got != want) {
    std::ostringstream msg;
    msg << what << " returned " << got << " entries, expected " << want;
    throw Error(ErrorCode::kDimensionMismatch, msg.str());
  }
}

// Evaluates every callback at z and validates sizes and finiteness.
class Evaluator {
 public:
  explicit Evaluator(const NlpProblem& p) : p_(p) {}

  void operator()(const VectorXd& z, Eval& e, bool derivatives) const {
    e.f = p_.objective(z, derivatives ? &e.grad : nullptr);
    if (!std::isfinite(e.f)) {
      throw Error(ErrorCode::kCallbackFailure, "objective returned a non-finite value");
    }
    if (derivatives) {
      RequireSize(e.grad.size(), p_.num_variables, "objective gradient");
      RequireFinite(e.grad, "objective gradient");
    }
    Constraint(p_.equalities, p_.num_equalities, z, e.c, derivatives ? &e.jc : nullptr,
               "equality constraints");
    Constraint(p_.inequalities, p_.num_inequalities, z, e.g, derivatives ? &e.jg : nullptr,
               "inequality constraints");
  }

 private:
  void Constraint(const ConstraintFn& fn, int m, const VectorXd& z, VectorXd& values,
                  SparseMatrix* jac, const char* what) const {
    if (m == 0) {
      values.resize(0);
      if (jac) jac->resize(0, p_.num_variables);
      return;
    }
    fn(z, values, jac);
    RequireSize(values.size(), m, what);
    RequireFinite(values, what);
    if (jac) {
      if (jac->rows() != m || jac->cols() != p_.num_variables) {
        throw Error(ErrorCode::kDimensionMismatch, std::string(what) + " Jacobian has wrong shape");
      }
      for (int k = 0; k < jac->outerSize(); ++k) {
        for (SparseMatrix::InnerIterator it(*jac, k); it; ++it) {
          if (!std::isfinite(it.value())) {
            throw Error(ErrorCode::kCallbackFailure,
                        std::string(what) + " Jacobian has a non-finite entry");
          }
        }
      }
    }
  }

  const NlpProblem& p_;
};

struct Multipliers {
  VectorXd lambda;
  VectorXd mu;
  double rho = 10.0;
};

VectorXd ShiftedInequality(const Eval& e, const Multipliers& m) {
  return (m.mu + m.rho * e.g).cwiseMax(0.0);
}

double Merit(const Eval& e, const Multipliers& m) {
  const VectorXd shifted = ShiftedInequality(e, m);
  return e.f + m.lambda.dot(e.c) + 0.5 * m.rho * e.c.squaredNorm() +
         (shifted.squaredNorm() - m.mu.squaredNorm()) / (2.0 * m.rho);
}

VectorXd MeritGradient(const Eval& e, const Multipliers& m) {
  VectorXd g = e.grad;
  if (e.c.size() > 0) g += e.jc.transpose() * (m.lambda + m.rho * e.c);
  if (e.g.size() > 0) g += e.jg.transpose() * ShiftedInequality(e, m);
  return g;
}

VectorXd Project(const VectorXd& z, const VectorXd& lo, const VectorXd& hi) {
  return z.cwiseMax(lo).cwiseMin(hi);
}

double ProjectedGradientNorm(const VectorXd& z, const VectorXd& grad, const VectorXd& lo,
                             const VectorXd& hi) {
  if (z.size() == 0) return 0.0;
  return (z - Project(z - grad, lo, hi)).cwiseAbs().maxCoeff();
}

double Violation(const Eval& e) {
  double v = 0.0;
  if (e.c.size() > 0) v = std::max(v, e.c.cwiseAbs().maxCoeff());
  if (e.g.size() > 0) v = std::max(v, e.g.maxCoeff());
  return v;
}

// Violation measure that also accounts for complementarity of the multiplier
// estimates: inactive constraints with positive μ count as violated.
double ComplementarityViolation(const Eval& e, const Multipliers& m) {
  double v = 0.0;
  if (e.c.size() > 0) v = std::max(v, e.c.cwiseAbs().maxCoeff());
  if (e.g.size() > 0) v = std::max(v, e.g.cwiseMax(-m.mu / m.rho).cwiseAbs().maxCoeff());
  return v;
}

double GradientScale(const Eval& e) {
  return std::max(1.0, e.grad.size() > 0 ? e.grad.cwiseAbs().maxCoeff() : 0.0);
}

// Dense damped-BFGS model of ∇²f used when no exact Hessian is supplied.
class BfgsModel {
 public:
  explicit BfgsModel(int n) : b_(Eigen::MatrixXd::Identity(n, n)) {}

  void update(const VectorXd& s, const VectorXd& y) {
    const double ss = s.squaredNorm();
    if (ss < 1e-30) return;
    if (first_) {
      const double sy = s.dot(y), yy = y.squaredNorm();
      if (sy > 1e-12 * std::sqrt(ss * yy) && sy > 0.0) b_ *= yy / sy;
      first_ = false;
    }
    const VectorXd bs = b_ * s;
    const double sbs = s.dot(bs);
    if (sbs <= 0.0) return;
    // Powell damping keeps the update positive definite.
    double sy = s.dot(y);
    VectorXd r = y;
    if (sy < 0.2 * sbs) {
      const double theta = 0.8 * sbs / (sbs - sy);
      r = theta * y + (1.0 - theta) * bs;
      sy = s.dot(r);
    }
    b_ += r * r.transpose() / sy - bs * bs.transpose() / sbs;
  }

  const Eigen::MatrixXd& matrix() const { return b_; }

 private:
  Eigen::MatrixXd b_;
  bool first_ = true;
};

struct InnerResult {
  int iterations = 0;
  double projected_gradient = 0.0;
  double last_step = 0.0;
  bool stalled = false;
};

class InnerSolver {
 public:
  InnerSolver(const NlpProblem& p, const Evaluator& eval) : p_(p), eval_(eval) {
    if (!p.objective_hessian) bfgs_.emplace(p.num_variables);
  }

  // Minimizes the augmented Lagrangian over the box starting from z (already
  // feasible for the bounds). On return z and e hold the final iterate.
  InnerResult minimize(VectorXd& z, Eval& e, const Multipliers& m, double tolerance,
                       int max_iterations) {
    InnerResult out;
    const int n = p_.num_variables;
    VectorXd grad = MeritGradient(e, m);
    double phi = Merit(e, m);
    for (;;) {
      out.projected_gradient = ProjectedGradientNorm(z, grad, p_.lower, p_.upper);
      if (out.projected_gradient <= tolerance || out.iterations >= max_iterations) break;

      // ε-active set: variables at (or within ε of) a bound whose gradient
      // pushes further out are moved by a scaled gradient step only.
      const double eps = std::min(1e-3, out.projected_gradient);
      std::vector<char> active(n, 0);
      for (int i = 0; i < n; ++i) {
        if (p_.lower[i] == p_.upper[i]) {
          active[i] = 1;
        } else if (z[i] <= p_.lower[i] + eps && grad[i] > 0.0) {
          active[i] = 1;
        } else if (z[i] >= p_.upper[i] - eps && grad[i] < 0.0) {
          active[i] = 1;
        }
      }

      const SparseMatrix h = ModelHessian(z, e, m);
      std::vector<int> free_index(n, -1);
      std::vector<int> free_vars;
      for (int i = 0; i < n; ++i) {
        if (!active[i]) {
          free_index[i] = static_cast<int>(free_vars.size());
          free_vars.push_back(i);
        }
      }
      const int nf = static_cast<int>(free_vars.size());
      std::vector<Eigen::Triplet<double>> trips;
      trips.reserve(h.nonZeros());
      double max_diag = 0.0;
      for (int k = 0; k < h.outerSize(); ++k) {
        for (SparseMatrix::InnerIterator it(h, k); it; ++it) {
          const int r = free_index[it.row()], c = free_index[it.col()];
          if (r >= 0 && c >= 0) {
            trips.emplace_back(r, c, it.value());
            if (r == c) max_diag = std::max(max_diag, it.value());
          }
        }
      }
      VectorXd h_diag = h.diagonal();
      VectorXd g_free(nf);
      for (int j = 0; j < nf; ++j) g_free[j] = grad[free_vars[j]];

      bool accepted = false;
      VectorXd z_new;
      Eval e_new;
      double phi_new = phi;
      for (int attempt = 0; attempt < 8 && !accepted; ++attempt) {
        VectorXd d = VectorXd::Zero(n);
        if (nf > 0) {
          VectorXd d_free;
          if (!SolveDamped(trips, nf, max_diag, g_free, d_free)) {
            damping_ = std::max(damping_ * 100.0, 1e-6);
            continue;
          }
          for (int j = 0; j < nf; ++j) d[free_vars[j]] = d_free[j];
        }
        for (int i = 0; i < n; ++i) {
          if (active[i] && p_.lower[i] != p_.upper[i]) {
            d[i] = -grad[i] / std::max(h_diag[i], 1e-8);
          }
        }
        double alpha = 1.0;
        for (int ls = 0; ls < 40; ++ls, alpha *= 0.5) {
          z_new = Project(z + alpha * d, p_.lower, p_.upper);
          const VectorXd dz = z_new - z;
          if (dz.cwiseAbs().maxCoeff() == 0.0) break;
          eval_(z_new, e_new, false);
          phi_new = Merit(e_new, m);
          double decrease = 0.0;
          for (int i = 0; i < n; ++i) decrease += grad[i] * dz[i];
          if (decrease < 0.0 && phi_new <= phi + 1e-4 * decrease) {
            accepted = true;
            break;
          }
          // Near a minimizer the merit change drowns in roundoff; accept the
          // full step when it still shrinks the projected gradient.
          if (ls == 0 && std::abs(phi_new - phi) <= kRoundoff * (1.0 + std::abs(phi))) {
            Eval probe;
            eval_(z_new, probe, true);
            const double pg_new =
                ProjectedGradientNorm(z_new, MeritGradient(probe, m), p_.lower, p_.upper);
            if (pg_new < 0.5 * out.projected_gradient) {
              accepted = true;
              break;
            }
          }
        }
        if (accepted) {
          damping_ = alpha == 1.0 ? std::max(damping_ * 0.1, kMinDamping) : damping_;
        } else {
          damping_ = std::max(damping_ * 100.0, 1e-6);
        }
      }
      if (!accepted) {
        out.stalled = true;
        break;
      }

      eval_(z_new, e_new, true);
      if (bfgs_) bfgs_->update(z_new - z, e_new.grad - e.grad);
      out.last_step = (z_new - z).cwiseAbs().maxCoeff();
      z = std::move(z_new);
      e = std::move(e_new);
      phi = phi_new;
      grad = MeritGradient(e, m);
      ++out.iterations;
    }
    return out;
  }

 private:
  static constexpr double kMinDamping = 1e-12;
  static constexpr double kRoundoff = 64.0 * std::numeric_limits<double>::epsilon();

  SparseMatrix ModelHessian(const VectorXd& z, const Eval& e, const Multipliers& m) const {
    const int n = p_.num_variables;
    SparseMatrix h(n, n);
    if (p_.objective_hessian) {
      h = p_.objective_hessian(z);
      if (h.rows() != n || h.cols() != n) {
        throw Error(ErrorCode::kDimensionMismatch, "Hessian has wrong shape");
      }
    } else {
      h = bfgs_->matrix().sparseView();
    }
    if (e.c.size() > 0) h += m.rho * SparseMatrix(e.jc.transpose() * e.jc);
    if (e.g.size() > 0) {
      // Only the inequalities inside the hinge contribute curvature.
      const VectorXd shifted = m.mu + m.rho * e.g;
      SparseMatrix jg = e.jg;
      for (int k = 0; k < jg.outerSize(); ++k) {
        for (SparseMatrix::InnerIterator it(jg, k); it; ++it) {
          if (shifted[it.row()] <= 0.0) it.valueRef() = 0.0;
        }
      }
      h += m.rho * SparseMatrix(jg.transpose() * jg);
    }
    return h;
  }

  bool SolveDamped(const std::vector<Eigen::Triplet<double>>& trips, int nf, double max_diag,
                   const VectorXd& g_free, VectorXd& d_free) {
    const double scale = std::max(1.0, max_diag);
    for (int tries = 0; tries < 12; ++tries) {
      SparseMatrix hf(nf, nf);
      hf.setFromTriplets(trips.begin(), trips.end());
      for (int j = 0; j < nf; ++j) hf.coeffRef(j, j) += damping_ * scale;
      Eigen::SimplicialLDLT<SparseMatrix> ldlt(hf);
      if (ldlt.info() == Eigen::Success && ldlt.vectorD().minCoeff() > 0.0) {
        d_free = ldlt.solve(-g_free);
        if (d_free.allFinite() && g_free.dot(d_free) < 0.0) return true;
      }
      damping_ = std::max(damping_ * 100.0, 1e-10);
    }
    return false;
  }

  const NlpProblem& p_;
  const Evaluator& eval_;
  std::optional<BfgsModel> bfgs_;
  double damping_ = 1e-10;
};

VectorXd DefaultStart(const NlpProblem& p) {
  VectorXd z(p.num_variables);
  for (int i = 0; i < p.num_variables; ++i) {
    const double lo = p.lower[i], hi = p.upper[i];
    if (std::isfinite(lo) && std::isfinite(hi)) {
      z[i] = 0.5 * (lo + hi);
    } else if (std::isfinite(lo)) {
      z[i] = std::max(lo, 0.0);
    } else if (std::isfinite(hi)) {
      z[i] = std::min(hi, 0.0);
    } else {
      z[i] = 0.0;
    }
  }
  return z;
}

void Log(std::ostream* os, int iter, const Eval& e, double violation, double step,
         double stationarity, double rho, int inner) {
  if (!os) return;
  *os << "iter=" << iter << " objective=" << std::setprecision(10) << e.f
      << " violation=" << std::setprecision(3) << violation << " step=" << step
      << " stationarity=" << stationarity << " penalty=" << rho << " inner=" << inner << '\n';
}

}  // namespace

void NlpProblem::validate() const {
  auto bad = [](const std::string& msg) { throw Error(ErrorCode::kDimensionMismatch, msg); };
  if (num_variables < 0 || num_equalities < 0 || num_inequalities < 0) bad("negative dimension");
  if (!objective) bad("objective callback missing");
  if (num_equalities > 0 && !equalities) bad("equality callback missing");
  if (num_inequalities > 0 && !inequalities) bad("inequality callback missing");
  if (lower.size() != num_variables || upper.size() != num_variables) {
    bad("bound vectors do not match the decision-vector dimension");
  }
  for (int i = 0; i < num_variables; ++i) {
    if (std::isnan(lower[i]) || std::isnan(upper[i]) || lower[i] > upper[i]) {
      bad("lower bound exceeds upper bound at variable " + std::to_string(i));
    }
  }
}

std::string to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::kConverged:
      return "converged";
    case SolveStatus::kIterationLimit:
      return "iteration-limit";
    case SolveStatus::kInfeasibleStall:
      return "infeasible-stall";
  }
  return "unknown";
}

double max_violation(const NlpProblem& problem, const VectorXd& z) {
  problem.validate();
  Eval e;
  const Evaluator eval(problem);
  eval(z, e, false);
  double v = Violation(e);
  for (int i = 0; i < problem.num_variables; ++i) {
    v = std::max({v, problem.lower[i] - z[i], z[i] - problem.upper[i]});
  }
  return v;
}

SolveReport solve(const NlpProblem& problem, const SolveOptions& options) {
  problem.validate();
  const int n = problem.num_variables;
  const Evaluator eval(problem);

  VectorXd z = options.initial_point.size() == 0 ? DefaultStart(problem) : options.initial_point;
  RequireSize(z.size(), n, "initial point");
  RequireFinite(z, "initial point");
  z = Project(z, problem.lower, problem.upper);

  Multipliers m;
  m.rho = options.initial_penalty;
  m.lambda = options.equality_multipliers.size() == 0 ? VectorXd::Zero(problem.num_equalities)
                                                      : options.equality_multipliers;
  m.mu = options.inequality_multipliers.size() == 0 ? VectorXd::Zero(problem.num_inequalities)
                                                    : options.inequality_multipliers;
  RequireSize(m.lambda.size(), problem.num_equalities, "equality multipliers");
  RequireSize(m.mu.size(), problem.num_inequalities, "inequality multipliers");
  m.mu = m.mu.cwiseMax(0.0);

  Eval e;
  eval(z, e, true);

  SolveReport report;
  InnerSolver inner(problem, eval);
  double prev_violation = kInf;
  double omega = std::max(options.optimality_tolerance, 1e-2) * GradientScale(e);
  int stall_count = 0;

  // A start that already satisfies the KKT conditions with the supplied
  // multipliers is returned as is.
  if (options.equality_multipliers.size() > 0 || options.inequality_multipliers.size() > 0) {
    VectorXd lg = e.grad;
    if (e.c.size() > 0) lg += e.jc.transpose() * m.lambda;
    if (e.g.size() > 0) lg += e.jg.transpose() * m.mu;
    double complementarity = 0.0;
    for (int i = 0; i < e.g.size(); ++i) {
      complementarity = std::max(complementarity, std::min(m.mu[i], -e.g[i]));
    }
    const double stationarity =
        ProjectedGradientNorm(z, lg, problem.lower, problem.upper) / GradientScale(e);
    if (Violation(e) <= options.feasibility_tolerance &&
        complementarity <= options.feasibility_tolerance &&
        stationarity <= options.optimality_tolerance) {
      report.status = SolveStatus::kConverged;
      report.stationarity = stationarity;
      report.solution = z;
      report.objective = e.f;
      report.max_violation = max_violation(problem, z);
      report.equality_multipliers = m.lambda;
      report.inequality_multipliers = m.mu;
      report.penalty = m.rho;
      return report;
    }
  }

  for (int outer = 1; outer <= options.max_outer_iterations; ++outer) {
    const double target = options.optimality_tolerance * GradientScale(e);
    const InnerResult ir =
        inner.minimize(z, e, m, std::max(omega, target), options.max_inner_iterations);
    report.inner_iterations += ir.iterations;
    report.outer_iterations = outer;

    const double violation = Violation(e);
    const double progress = ComplementarityViolation(e, m);
    // After the first-order update below, ∇L(z, λ⁺, μ⁺) equals the gradient
    // of the augmented Lagrangian the inner loop just minimized.
    const double stationarity =
        ProjectedGradientNorm(z, MeritGradient(e, m), problem.lower, problem.upper) /
        GradientScale(e);
    m.lambda += m.rho * e.c;
    m.mu = ShiftedInequality(e, m);
    Log(options.log, outer, e, violation, ir.last_step, stationarity, m.rho, ir.iterations);

    report.stationarity = stationarity;
    if (violation <= options.feasibility_tolerance &&
        stationarity <= options.optimality_tolerance) {
      report.status = SolveStatus::kConverged;
      break;
    }

    const bool feasible = progress <= options.feasibility_tolerance;
    if (!feasible && (progress > 0.25 * prev_violation || ir.stalled)) {
      if (m.rho >= options.max_penalty) {
        ++stall_count;
      } else {
        m.rho = std::min(m.rho * 10.0, options.max_penalty);
      }
    } else {
      stall_count = 0;
    }
    if (progress < prev_violation) prev_violation = progress;
    if (stall_count >= 3 && violation > options.feasibility_tolerance) {
      report.status = SolveStatus::kInfeasibleStall;
      break;
    }
    omega = std::max(target, 0.1 * omega);
  }

  report.solution = z;
  report.objective = e.f;
  report.max_violation = max_violation(problem, z);
  report.equality_multipliers = m.lambda;
  report.inequality_multipliers = m.mu;
  report.penalty = m.rho;
  if (report.status == SolveStatus::kConverged &&
      report.max_violation > options.feasibility_tolerance) {
    report.status = SolveStatus::kIterationLimit;
  }
  return report;
}

double check_gradients(const NlpProblem& problem, const VectorXd& point) {
  problem.validate();
  RequireSize(point.size(), problem.num_variables, "point");
  const Evaluator eval(problem);
  Eval base;
  eval(point, base, true);
  const Eigen::MatrixXd jc = Eigen::MatrixXd(base.jc);
  const Eigen::MatrixXd jg = Eigen::MatrixXd(base.jg);

  double worst = 0.0;
  auto rel = [](double a, double fd) { return std::abs(a - fd) / std::max(1.0, std::abs(a)); };
  VectorXd zp = point, zm = point;
  Eval ep, em;
  for (int i = 0; i < problem.num_variables; ++i) {
    const double step = 1e-6 * std::max(1.0, std::abs(point[i]));
    zp[i] = point[i] + step;
    zm[i] = point[i] - step;
    eval(zp, ep, false);
    eval(zm, em, false);
    worst = std::max(worst, rel(base.grad[i], (ep.f - em.f) / (2.0 * step)));
    for (int r = 0; r < problem.num_equalities; ++r) {
      worst = std::max(worst, rel(jc(r, i), (ep.c[r] - em.c[r]) / (2.0 * step)));
    }
    for (int r = 0; r < problem.num_inequalities; ++r) {
      worst = std::max(worst, rel(jg(r, i), (ep.g[r] - em.g[r]) / (2.0 * step)));
    }
    zp[i] = zm[i] = point[i];
  }
  return worst;
}

}  // namespace vtauv::nlp
