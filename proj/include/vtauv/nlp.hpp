#pragma once

// Smooth constrained nonlinear programming:
//
//   minimize f(z)  subject to  c(z) = 0,  g(z) <= 0,  lower <= z <= upper.
//
// Solved by an augmented Lagrangian outer loop (squared-hinge terms for the
// inequalities) around a bound-projected quasi-Newton inner minimization.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>

namespace vtauv::nlp {

using Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;

/// Values and (optionally) the Jacobian of a vector constraint function.
/// The callback must resize `values` and, when `jacobian` is non-null, fill it.
using ConstraintFn =
    std::function<void(const VectorXd& z, VectorXd& values, SparseMatrix* jacobian)>;

struct NlpProblem {
  int num_variables = 0;
  int num_equalities = 0;
  int num_inequalities = 0;
  /// Returns f(z); writes ∇f(z) into `gradient` when non-null.
  std::function<double(const VectorXd& z, VectorXd* gradient)> objective;
  ConstraintFn equalities;    // c(z) = 0
  ConstraintFn inequalities;  // g(z) <= 0
  /// Optional exact ∇²f. Without it the inner solver keeps a dense BFGS
  /// approximation, which is only sensible for small problems.
  std::function<SparseMatrix(const VectorXd& z)> objective_hessian;
  VectorXd lower;
  VectorXd upper;

  /// Throws Error(kDimensionMismatch) on inconsistent sizes or bounds.
  void validate() const;
};

enum class SolveStatus { kConverged, kIterationLimit, kInfeasibleStall };

std::string to_string(SolveStatus status);

struct SolveOptions {
  double feasibility_tolerance = 1e-6;
  double optimality_tolerance = 1e-5;
  int max_outer_iterations = 50;
  int max_inner_iterations = 500;
  double initial_penalty = 10.0;
  double max_penalty = 1e10;
  /// Starting point; projected onto the bounds. Defaults to the box midpoint
  /// (or the finite bound, or zero).
  VectorXd initial_point;
  /// Warm-start multipliers; zero when empty.
  VectorXd equality_multipliers;
  VectorXd inequality_multipliers;
  /// Line-oriented iteration log (iter, objective, violation, step norm).
  std::ostream* log = nullptr;
};

struct SolveReport {
  VectorXd solution;
  double objective = 0.0;
  double max_violation = 0.0;
  double stationarity = 0.0;
  int outer_iterations = 0;
  int inner_iterations = 0;
  SolveStatus status = SolveStatus::kIterationLimit;
  VectorXd equality_multipliers;
  VectorXd inequality_multipliers;
  double penalty = 0.0;
};

/// Largest of |c_i(z)|, max(0, g_i(z)) and the distance of z outside its box.
double max_violation(const NlpProblem& problem, const VectorXd& z);

SolveReport solve(const NlpProblem& problem, const SolveOptions& options = {});

/// Largest relative discrepancy |analytic − fd| / max(1, |analytic|) between
/// the supplied first derivatives and central finite differences (step
/// 1e-6·max(1, |z_i|)), over ∇f and both constraint Jacobians.
double check_gradients(const NlpProblem& problem, const VectorXd& point);

}  // namespace vtauv::nlp
