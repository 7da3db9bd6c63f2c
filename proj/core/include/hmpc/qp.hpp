#pragma once

#include <Eigen/Core>
#include <optional>

namespace hmpc {

/// Dense convex QP
///   min 0.5*x'Hx + g'x
///   s.t. lb <= x <= ub, lbA <= Ax <= ubA
/// Rows with lbA == ubA are equalities. +-inf bounds are allowed.
struct QPProblem {
  Eigen::MatrixXd H;
  Eigen::VectorXd g;
  Eigen::VectorXd lb, ub;
  Eigen::MatrixXd A;  // m x n, m may be 0
  Eigen::VectorXd lbA, ubA;

  int num_vars() const { return static_cast<int>(g.size()); }
  int num_rows() const { return static_cast<int>(lbA.size()); }

  static QPProblem boxed(Eigen::MatrixXd H, Eigen::VectorXd g,
                         Eigen::VectorXd lb, Eigen::VectorXd ub);
};

enum class QPStatus { optimal, max_iter, infeasible };

const char* to_string(QPStatus s);

struct QPSolution {
  Eigen::VectorXd x;
  QPStatus status = QPStatus::max_iter;
  int iterations = 0;
  double objective = 0.0;
  double solve_time = 0.0;  // seconds
};

struct QPSolverOptions {
  int max_iter = 200;
  double feas_tol = 1e-9;
  double opt_tol = 1e-9;
};

/// Primal active-set solver for small dense strictly convex QPs.
/// Working-set steps solve an equality-constrained QP through a
/// Cholesky factorization of the free-variable Hessian block plus a
/// Schur complement on the active rows. Infeasible starts go through an
/// elastic phase-1 solved with the same machinery. Deterministic:
/// degenerate ties break on the smallest constraint index.
///
/// One solve at a time per instance; distinct instances are independent.
class QPSolver {
 public:
  explicit QPSolver(QPSolverOptions opts = {}) : opts_(opts) {}

  QPSolution solve(const QPProblem& p,
                   const std::optional<Eigen::VectorXd>& warm_start = {});

  const QPSolverOptions& options() const { return opts_; }

 private:
  QPSolverOptions opts_;
};

struct KKTResiduals {
  double stationarity = 0.0;
  double primal = 0.0;
  double complementarity = 0.0;
};

/// Max-norm KKT residuals of a candidate solution, independent of the
/// solver internals: multipliers are recovered by least squares on the
/// constraints detected active at x.
KKTResiduals kkt_residuals(const QPProblem& p, const QPSolution& sol);

}  // namespace hmpc
