#include "hmpc/qp.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace hmpc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Side { lower, upper, equality };

struct ActiveRow {
  int row;
  Side side;
};

double clamp_finite(double v, double lo, double hi) {
  return std::min(std::max(v, lo), hi);
}

// Working data for one phase-2 run.
struct ActiveSetCore {
  const QPProblem* p;
  const Eigen::MatrixXd* H;  // regularized, symmetric
  QPSolverOptions opts;

  Eigen::VectorXd x;
  std::vector<bool> var_fixed;       // fixed at a bound
  std::vector<Side> var_side;       // valid when fixed
  std::vector<ActiveRow> act;       // active general rows
  std::vector<char> row_active;     // membership flag per row

  int iterations = 0;

  // EQP target point y and row multipliers for the current working set:
  //   min 0.5 y'Hy + g'y  s.t.  y_fixed = bound, A_act y = b_act
  bool eqp(Eigen::VectorXd& y, Eigen::VectorXd& lambda) const {
    const int n = p->num_vars();
    std::vector<int> free_idx;
    free_idx.reserve(n);
    for (int i = 0; i < n; ++i)
      if (!var_fixed[i]) free_idx.push_back(i);
    const int nf = static_cast<int>(free_idx.size());
    const int na = static_cast<int>(act.size());

    y.resize(n);
    for (int i = 0; i < n; ++i) {
      if (var_fixed[i]) {
        y(i) = (var_side[i] == Side::lower) ? p->lb(i) : p->ub(i);
      }
    }
    lambda.resize(na);
    if (nf == 0) {
      lambda.setZero();  // recovered later from stationarity if needed
      return true;
    }

    Eigen::MatrixXd Hff(nf, nf);
    Eigen::VectorXd rhs(nf);
    for (int a = 0; a < nf; ++a) {
      const int i = free_idx[a];
      for (int b = 0; b < nf; ++b) Hff(a, b) = (*H)(i, free_idx[b]);
      double fix_term = 0.0;
      for (int j = 0; j < n; ++j)
        if (var_fixed[j]) fix_term += (*H)(i, j) * y(j);
      rhs(a) = -p->g(i) - fix_term;
    }
    Eigen::LLT<Eigen::MatrixXd> llt(Hff);
    if (llt.info() != Eigen::Success) return false;

    Eigen::VectorXd y0 = llt.solve(rhs);
    if (na == 0) {
      for (int a = 0; a < nf; ++a) y(free_idx[a]) = y0(a);
      return true;
    }

    Eigen::MatrixXd Af(na, nf);
    Eigen::VectorXd b(na);
    for (int r = 0; r < na; ++r) {
      const auto& ar = act[r];
      for (int a = 0; a < nf; ++a) Af(r, a) = p->A(ar.row, free_idx[a]);
      double bx = (ar.side == Side::lower) ? p->lbA(ar.row) : p->ubA(ar.row);
      for (int j = 0; j < n; ++j)
        if (var_fixed[j]) bx -= p->A(ar.row, j) * y(j);
      b(r) = bx;
    }
    const Eigen::MatrixXd K = llt.solve(Af.transpose());
    Eigen::MatrixXd S = Af * K;
    // Tiny ridge keeps degenerate (linearly dependent) working sets moving.
    const double ridge = 1e-13 * (1.0 + S.diagonal().cwiseAbs().maxCoeff());
    S.diagonal().array() += ridge;
    Eigen::LDLT<Eigen::MatrixXd> sldlt(S);
    lambda = sldlt.solve(Af * y0 - b);
    const Eigen::VectorXd yf = y0 - K * lambda;
    for (int a = 0; a < nf; ++a) y(free_idx[a]) = yf(a);
    return true;
  }

  // Largest step x + alpha*d keeping all inactive constraints satisfied.
  // Returns the blocking constraint id (vars 0..n-1, rows n..n+m-1) or -1.
  double line_search(const Eigen::VectorXd& d, int& blocking,
                     Side& block_side) const {
    const int n = p->num_vars();
    const int m = p->num_rows();
    double alpha = 1.0;
    blocking = -1;
    for (int i = 0; i < n; ++i) {
      if (var_fixed[i]) continue;
      if (d(i) > 1e-14) {
        if (p->ub(i) < kInf) {
          const double a = (p->ub(i) - x(i)) / d(i);
          if (a < alpha - 1e-15) {
            alpha = std::max(a, 0.0);
            blocking = i;
            block_side = Side::upper;
          }
        }
      } else if (d(i) < -1e-14) {
        if (p->lb(i) > -kInf) {
          const double a = (p->lb(i) - x(i)) / d(i);
          if (a < alpha - 1e-15) {
            alpha = std::max(a, 0.0);
            blocking = i;
            block_side = Side::lower;
          }
        }
      }
    }
    for (int r = 0; r < m; ++r) {
      if (row_active[r]) continue;
      const double s = p->A.row(r).dot(d);
      const double ax = p->A.row(r).dot(x);
      if (s > 1e-14 && p->ubA(r) < kInf) {
        const double a = (p->ubA(r) - ax) / s;
        if (a < alpha - 1e-15) {
          alpha = std::max(a, 0.0);
          blocking = n + r;
          block_side = Side::upper;
        }
      } else if (s < -1e-14 && p->lbA(r) > -kInf) {
        const double a = (p->lbA(r) - ax) / s;
        if (a < alpha - 1e-15) {
          alpha = std::max(a, 0.0);
          blocking = n + r;
          block_side = Side::lower;
        }
      }
    }
    return alpha;
  }

  QPStatus run() {
    const int n = p->num_vars();
    Eigen::VectorXd y, lambda, d;
    while (iterations < opts.max_iter) {
      ++iterations;
      if (!eqp(y, lambda)) return QPStatus::max_iter;
      d = y - x;
      const double step = d.cwiseAbs().maxCoeff();
      if (step <= 1e-11 * (1.0 + x.cwiseAbs().maxCoeff())) {
        // Stationary on the working set: check multiplier signs.
        Eigen::VectorXd grad = (*H) * x + p->g;
        for (std::size_t r = 0; r < act.size(); ++r) {
          grad += lambda(static_cast<int>(r)) * p->A.row(act[r].row).transpose();
        }
        double worst = -opts.opt_tol;
        int worst_id = -1;
        bool worst_is_row = false;
        std::size_t worst_pos = 0;
        for (int i = 0; i < n; ++i) {
          if (!var_fixed[i]) continue;
          if (p->lb(i) == p->ub(i)) continue;  // pinned variable, no sign rule
          // stationarity: grad_i + mu_i = 0, sign flips with the side
          const double sigma =
              (var_side[i] == Side::upper) ? -grad(i) : grad(i);
          if (sigma < worst) {
            worst = sigma;
            worst_id = i;
            worst_is_row = false;
          }
        }
        for (std::size_t r = 0; r < act.size(); ++r) {
          if (act[r].side == Side::equality) continue;
          const double lam = lambda(static_cast<int>(r));
          const double sigma = (act[r].side == Side::upper) ? lam : -lam;
          if (sigma < worst) {
            worst = sigma;
            worst_id = act[r].row;
            worst_is_row = true;
            worst_pos = r;
          }
        }
        if (worst_id < 0) return QPStatus::optimal;
        if (worst_is_row) {
          row_active[act[worst_pos].row] = 0;
          act.erase(act.begin() + static_cast<long>(worst_pos));
        } else {
          var_fixed[worst_id] = false;
        }
        continue;
      }
      int blocking = -1;
      Side side = Side::upper;
      const double alpha = line_search(d, blocking, side);
      x += alpha * d;
      if (blocking < 0) continue;  // full step; multipliers checked next pass
      if (blocking < n) {
        var_fixed[blocking] = true;
        var_side[blocking] = side;
        x(blocking) = (side == Side::lower) ? p->lb(blocking) : p->ub(blocking);
      } else {
        act.push_back({blocking - n, side});
        row_active[blocking - n] = 1;
      }
    }
    return QPStatus::max_iter;
  }
};

double row_violation(const QPProblem& p, const Eigen::VectorXd& x) {
  double v = 0.0;
  for (int r = 0; r < p.num_rows(); ++r) {
    const double ax = p.A.row(r).dot(x);
    if (p.lbA(r) > -kInf) v = std::max(v, p.lbA(r) - ax);
    if (p.ubA(r) < kInf) v = std::max(v, ax - p.ubA(r));
  }
  return v;
}

// Regularize toward positive definiteness per the contract: eigenvalues in
// (-1e-8, 0) get a 1e-9 jitter (escalated only as far as Cholesky needs);
// anything below -1e-8 is a caller error.
Eigen::MatrixXd prepare_hessian(const QPProblem& p) {
  const int n = p.num_vars();
  if ((p.H - p.H.transpose()).cwiseAbs().maxCoeff() > 1e-10) {
    throw std::invalid_argument("QPSolver: H is not symmetric");
  }
  Eigen::MatrixXd Hs = 0.5 * (p.H + p.H.transpose());
  Eigen::LLT<Eigen::MatrixXd> llt(Hs);
  if (llt.info() == Eigen::Success) return Hs;
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
      Hs, Eigen::EigenvaluesOnly);
  const double lam_min = es.eigenvalues().minCoeff();
  if (lam_min < -1e-8) {
    throw std::invalid_argument("QPSolver: H has eigenvalue below -1e-8");
  }
  double jitter = 1e-9 + std::max(0.0, -lam_min);
  for (int k = 0; k < 8; ++k) {
    Eigen::MatrixXd Hj = Hs + jitter * Eigen::MatrixXd::Identity(n, n);
    if (Eigen::LLT<Eigen::MatrixXd>(Hj).info() == Eigen::Success) return Hj;
    jitter *= 10.0;
  }
  throw std::invalid_argument("QPSolver: could not regularize H");
}

void validate_dims(const QPProblem& p) {
  const int n = p.num_vars();
  const int m = p.num_rows();
  if (p.H.rows() != n || p.H.cols() != n || p.lb.size() != n ||
      p.ub.size() != n || p.A.rows() != m ||
      (m > 0 && p.A.cols() != n) || p.ubA.size() != m) {
    throw std::invalid_argument("QPProblem: inconsistent dimensions");
  }
}

}  // namespace

QPProblem QPProblem::boxed(Eigen::MatrixXd H, Eigen::VectorXd g,
                           Eigen::VectorXd lb, Eigen::VectorXd ub) {
  QPProblem p;
  p.H = std::move(H);
  p.g = std::move(g);
  p.lb = std::move(lb);
  p.ub = std::move(ub);
  const int n = p.num_vars();
  p.A.resize(0, n);
  p.lbA.resize(0);
  p.ubA.resize(0);
  return p;
}

const char* to_string(QPStatus s) {
  switch (s) {
    case QPStatus::optimal: return "optimal";
    case QPStatus::max_iter: return "max_iter";
    case QPStatus::infeasible: return "infeasible";
  }
  return "unknown";
}

QPSolution QPSolver::solve(const QPProblem& p,
                           const std::optional<Eigen::VectorXd>& warm_start) {
  const auto t0 = std::chrono::steady_clock::now();
  validate_dims(p);
  const int n = p.num_vars();
  const int m = p.num_rows();

  QPSolution sol;
  sol.x = Eigen::VectorXd::Zero(n);
  auto finish = [&](QPStatus st, int iters) {
    sol.status = st;
    sol.iterations = iters;
    sol.objective = 0.5 * sol.x.dot(p.H * sol.x) + p.g.dot(sol.x);
    sol.solve_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    return sol;
  };

  for (int i = 0; i < n; ++i) {
    if (p.lb(i) > p.ub(i)) return finish(QPStatus::infeasible, 0);
  }
  for (int r = 0; r < m; ++r) {
    if (p.lbA(r) > p.ubA(r)) return finish(QPStatus::infeasible, 0);
  }

  const Eigen::MatrixXd Hreg = prepare_hessian(p);

  Eigen::VectorXd x0(n);
  for (int i = 0; i < n; ++i) {
    const double seed = warm_start ? (*warm_start)(i) : 0.0;
    x0(i) = clamp_finite(seed, p.lb(i), p.ub(i));
  }
  int phase1_iters = 0;
  if (m > 0 && row_violation(p, x0) > opts_.feas_tol) {
    // Warm start may be stale; a clamped origin is often still feasible.
    Eigen::VectorXd xz(n);
    for (int i = 0; i < n; ++i) xz(i) = clamp_finite(0.0, p.lb(i), p.ub(i));
    if (row_violation(p, xz) <= opts_.feas_tol) {
      x0 = xz;
    } else {
      // Elastic phase 1: minimize slack mass s with the same machinery.
      QPProblem e;
      const int ne = n + m;
      e.H = Eigen::MatrixXd::Zero(ne, ne);
      e.H.diagonal().setConstant(1e-8);
      e.g = Eigen::VectorXd::Zero(ne);
      e.g.head(n) = -1e-8 * x0;
      e.g.tail(m).setConstant(1.0);
      e.lb = Eigen::VectorXd::Constant(ne, -kInf);
      e.ub = Eigen::VectorXd::Constant(ne, kInf);
      e.lb.head(n) = p.lb;
      e.ub.head(n) = p.ub;
      e.lb.tail(m).setZero();
      e.A = Eigen::MatrixXd::Zero(2 * m, ne);
      e.lbA = Eigen::VectorXd::Constant(2 * m, -kInf);
      e.ubA = Eigen::VectorXd::Constant(2 * m, kInf);
      Eigen::VectorXd z0(ne);
      z0.head(n) = x0;
      for (int r = 0; r < m; ++r) {
        e.A.block(2 * r, 0, 1, n) = p.A.row(r);
        e.A(2 * r, n + r) = -1.0;  // a'x - s <= ubA
        e.ubA(2 * r) = p.ubA(r);
        e.A.block(2 * r + 1, 0, 1, n) = p.A.row(r);
        e.A(2 * r + 1, n + r) = 1.0;  // a'x + s >= lbA
        e.lbA(2 * r + 1) = p.lbA(r);
        const double ax = p.A.row(r).dot(x0);
        double viol = 0.0;
        if (p.lbA(r) > -kInf) viol = std::max(viol, p.lbA(r) - ax);
        if (p.ubA(r) < kInf) viol = std::max(viol, ax - p.ubA(r));
        z0(n + r) = viol * (1.0 + 1e-6) + 1e-9;
      }
      ActiveSetCore ph1;
      ph1.p = &e;
      const Eigen::MatrixXd He = e.H;
      ph1.H = &He;
      ph1.opts = opts_;
      ph1.opts.max_iter = std::max(opts_.max_iter, 2 * ne + 20);
      ph1.x = z0;
      ph1.var_fixed.assign(ne, false);
      ph1.var_side.assign(ne, Side::lower);
      ph1.row_active.assign(2 * m, 0);
      ph1.run();
      phase1_iters = ph1.iterations;
      x0 = ph1.x.head(n);
      for (int i = 0; i < n; ++i) x0(i) = clamp_finite(x0(i), p.lb(i), p.ub(i));
      if (row_violation(p, x0) > 1e-8) {
        sol.x = x0;
        return finish(QPStatus::infeasible, phase1_iters);
      }
    }
  }

  ActiveSetCore core;
  core.p = &p;
  core.H = &Hreg;
  core.opts = opts_;
  core.x = x0;
  core.var_fixed.assign(n, false);
  core.var_side.assign(n, Side::lower);
  core.row_active.assign(m, 0);
  // Start with equality rows and any bounds the start point sits on.
  for (int i = 0; i < n; ++i) {
    if (p.lb(i) == p.ub(i)) {
      core.var_fixed[i] = true;
      core.var_side[i] = Side::lower;
    } else if (x0(i) >= p.ub(i) - 1e-12 && p.ub(i) < kInf) {
      core.var_fixed[i] = true;
      core.var_side[i] = Side::upper;
    } else if (x0(i) <= p.lb(i) + 1e-12 && p.lb(i) > -kInf) {
      core.var_fixed[i] = true;
      core.var_side[i] = Side::lower;
    }
  }
  for (int r = 0; r < m; ++r) {
    if (p.ubA(r) - p.lbA(r) <= 1e-12) {
      core.act.push_back({r, Side::equality});
      core.row_active[r] = 1;
    }
  }
  const QPStatus st = core.run();
  sol.x = core.x;
  return finish(st, phase1_iters + core.iterations);
}

KKTResiduals kkt_residuals(const QPProblem& p, const QPSolution& sol) {
  validate_dims(p);
  const int n = p.num_vars();
  const int m = p.num_rows();
  const Eigen::VectorXd& x = sol.x;
  const Eigen::VectorXd grad = p.H * x + p.g;

  KKTResiduals res;
  struct Entry {
    Eigen::VectorXd a;
    double slack;
    bool is_upper;
    bool is_equality;
  };
  std::vector<Entry> active;
  const double tol = 1e-7;
  for (int i = 0; i < n; ++i) {
    if (p.lb(i) > -kInf) res.primal = std::max(res.primal, p.lb(i) - x(i));
    if (p.ub(i) < kInf) res.primal = std::max(res.primal, x(i) - p.ub(i));
    const double d_lo = (p.lb(i) > -kInf) ? x(i) - p.lb(i) : kInf;
    const double d_up = (p.ub(i) < kInf) ? p.ub(i) - x(i) : kInf;
    const bool eq = p.lb(i) == p.ub(i);
    if (std::min(d_lo, d_up) <= tol * (1.0 + std::abs(x(i)))) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
      e(i) = 1.0;
      active.push_back({e, std::max(std::min(d_lo, d_up), 0.0), d_up <= d_lo, eq});
    }
  }
  for (int r = 0; r < m; ++r) {
    const double ax = p.A.row(r).dot(x);
    if (p.lbA(r) > -kInf) res.primal = std::max(res.primal, p.lbA(r) - ax);
    if (p.ubA(r) < kInf) res.primal = std::max(res.primal, ax - p.ubA(r));
    const double d_lo = (p.lbA(r) > -kInf) ? ax - p.lbA(r) : kInf;
    const double d_up = (p.ubA(r) < kInf) ? p.ubA(r) - ax : kInf;
    const bool eq = p.ubA(r) - p.lbA(r) <= 1e-12;
    if (std::min(d_lo, d_up) <= tol * (1.0 + std::abs(ax))) {
      active.push_back({p.A.row(r).transpose(), std::max(std::min(d_lo, d_up), 0.0),
                        d_up <= d_lo, eq});
    }
  }

  if (active.empty()) {
    res.stationarity = grad.size() ? grad.cwiseAbs().maxCoeff() : 0.0;
    res.complementarity = 0.0;
    return res;
  }
  Eigen::MatrixXd M(n, static_cast<int>(active.size()));
  for (std::size_t j = 0; j < active.size(); ++j) {
    M.col(static_cast<int>(j)) = active[j].a;
  }
  const Eigen::VectorXd nu = M.colPivHouseholderQr().solve(-grad);
  res.stationarity = (grad + M * nu).cwiseAbs().maxCoeff();
  for (std::size_t j = 0; j < active.size(); ++j) {
    const double mult = nu(static_cast<int>(j));
    res.complementarity =
        std::max(res.complementarity, std::abs(mult) * active[j].slack);
    if (!active[j].is_equality) {
      const double sigma = active[j].is_upper ? mult : -mult;
      res.complementarity = std::max(res.complementarity, -sigma);
    }
  }
  res.primal = std::max(res.primal, 0.0);
  return res;
}

}  // namespace hmpc
