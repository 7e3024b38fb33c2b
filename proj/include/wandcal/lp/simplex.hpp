#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "wandcal/core.hpp"
#include "wandcal/lp/factor.hpp"
#include "wandcal/lp/problem.hpp"

namespace wandcal::lp {

struct LpConfig {
  double feas_tol = 1e-7;        // bound/row violation accepted as feasible
  double opt_tol = 1e-9;         // reduced-cost threshold
  double ratio_tol = 1e-9;       // |alpha| below this cannot block or pivot
  long max_iterations = 0;       // 0 = derive from problem size
  int refactor_interval = 64;    // basis updates between refactorizations
  int degeneracy_trip = 100;     // degenerate steps before Bland's rule kicks in
  bool devex = true;
};

/// Revised simplex for box-bounded variables over rows A x <= b. Each row
/// gets a slack in [0, inf); nonbasic variables sit exactly at a bound (free
/// ones at zero). Phase 1 minimizes the sum of bound infeasibilities of the
/// basic variables with composite costs; Phase 2 the true objective. A result
/// is declared only when pricing finds no improving column immediately after
/// a fresh refactorization, so "optimal" always means verified feasible and
/// optimal within the configured tolerances.
class SimplexSolver {
 public:
  SimplexSolver(const LpProblem& p, const LpConfig& cfg) : p_(p), cfg_(cfg) {
    n_ = p.num_vars();
    m_ = p.num_rows();
    total_ = n_ + m_;

    // Column-major copy of the structural matrix.
    std::vector<int> counts(n_, 0);
    for (const int col : p.row_cols) ++counts[col];
    col_starts_.assign(n_ + 1, 0);
    for (int j = 0; j < n_; ++j) col_starts_[j + 1] = col_starts_[j] + counts[j];
    col_rows_.resize(p.row_cols.size());
    col_vals_.resize(p.row_cols.size());
    std::vector<int> fill = col_starts_;
    for (int i = 0; i < m_; ++i) {
      for (int k = p.row_starts[i]; k < p.row_starts[i + 1]; ++k) {
        const int j = p.row_cols[k];
        col_rows_[fill[j]] = i;
        col_vals_[fill[j]] = p.row_vals[k];
        ++fill[j];
      }
    }

    lower_.resize(total_);
    upper_.resize(total_);
    for (int j = 0; j < n_; ++j) {
      lower_[j] = p.lower[j];
      upper_[j] = p.upper[j];
    }
    for (int i = 0; i < m_; ++i) {
      lower_[n_ + i] = 0.0;
      upper_[n_ + i] = kInfinity;
    }
  }

  LpSolution solve(const std::vector<VarStatus>* warm) {
    init_basis(warm);
    refactorize();

    const long max_iter = cfg_.max_iterations > 0
                              ? cfg_.max_iterations
                              : 5000 + 25L * (static_cast<long>(m_) + n_);
    long iter = 0;
    int degenerate_run = 0;
    bool bland = false;
    devex_.assign(total_, 1.0);

    LpStatus status = LpStatus::IterationLimit;
    while (true) {
      if (iter >= max_iter) {
        status = LpStatus::IterationLimit;
        break;
      }
      if (factor_.update_count() >= cfg_.refactor_interval) refactorize();

      const bool phase1 = max_infeasibility() > cfg_.feas_tol;

      // Pricing: y = B^-T c_B, then reduced costs over nonbasic columns.
      Eigen::VectorXd y = Eigen::VectorXd::Zero(m_);
      for (int k = 0; k < m_; ++k) {
        const int j = basis_[k];
        y[k] = phase1 ? infeasibility_cost(j) : cost_of(j);
      }
      factor_.btran(y);

      int q = -1;
      double q_d = 0.0, best_score = 0.0;
      int sigma = 0;
      for (int j = 0; j < total_; ++j) {
        const VarStatus st = status_[j];
        if (st == VarStatus::Basic) continue;
        if (upper_[j] - lower_[j] <= 0.0) continue;  // fixed, cannot move
        const double d = (phase1 ? 0.0 : cost_of(j)) - col_dot(y, j);
        int dir = 0;
        if (st == VarStatus::AtLower && d < -cfg_.opt_tol) dir = 1;
        else if (st == VarStatus::AtUpper && d > cfg_.opt_tol) dir = -1;
        else if (st == VarStatus::Free && std::abs(d) > cfg_.opt_tol)
          dir = d < 0 ? 1 : -1;
        if (dir == 0) continue;
        if (bland) {
          q = j;
          q_d = d;
          sigma = dir;
          break;
        }
        const double score = d * d / devex_[j];
        if (score > best_score) {
          best_score = score;
          q = j;
          q_d = d;
          sigma = dir;
        }
      }

      if (q < 0) {
        // No improving column. Only trust the conclusion on a fresh factor.
        if (!clean_) {
          refactorize();
          continue;
        }
        status = phase1 ? LpStatus::Infeasible : LpStatus::Optimal;
        break;
      }

      // Entering column image alpha = B^-1 A_q, indexed by basis position.
      Eigen::VectorXd alpha = Eigen::VectorXd::Zero(m_);
      scatter_col(q, alpha);
      factor_.ftran(alpha);

      // Ratio test. x_B moves by -t*sigma*alpha; the entering variable by
      // +t*sigma from its bound, limited by its opposite bound (bound flip).
      double t_best = kInfinity;
      int r = -1;  // blocking basis position; -1 = bound flip
      int block_bound = 0;  // -1 lower, +1 upper
      const double span = upper_[q] - lower_[q];
      if (std::isfinite(span)) t_best = span;

      for (int k = 0; k < m_; ++k) {
        if (std::abs(alpha[k]) <= cfg_.ratio_tol) continue;
        const int j = basis_[k];
        const double delta = sigma * alpha[k];
        const double xv = x_[j];
        double ratio = kInfinity;
        int bound = 0;
        if (phase1 && xv < lower_[j] - cfg_.feas_tol) {
          if (delta < 0) {  // moving up toward its violated lower bound
            ratio = (lower_[j] - xv) / (-delta);
            bound = -1;
          }
        } else if (phase1 && xv > upper_[j] + cfg_.feas_tol) {
          if (delta > 0) {  // moving down toward its violated upper bound
            ratio = (xv - upper_[j]) / delta;
            bound = 1;
          }
        } else if (delta > 0 && std::isfinite(lower_[j])) {
          ratio = (xv - lower_[j]) / delta;
          bound = -1;
        } else if (delta < 0 && std::isfinite(upper_[j])) {
          ratio = (upper_[j] - xv) / (-delta);
          bound = 1;
        }
        if (bound == 0) continue;
        ratio = std::max(ratio, 0.0);
        bool take = false;
        if (r < 0) {
          take = ratio < t_best;
        } else if (ratio < t_best - 1e-12) {
          take = true;
        } else if (ratio <= t_best + 1e-12) {
          // Tie: Bland wants the lowest column index; otherwise prefer the
          // numerically larger pivot.
          take = bland ? j < basis_[r]
                       : std::abs(alpha[k]) > std::abs(alpha[r]);
        }
        if (take) {
          t_best = ratio;
          r = k;
          block_bound = bound;
        }
      }

      if (!std::isfinite(t_best)) {
        if (phase1) {
          // The phase-1 objective is bounded below; an unblocked ray is a
          // numerical artifact. Rebuild and retry once per clean state.
          if (!clean_) {
            refactorize();
            continue;
          }
          throw NumericError("phase-1 ray without blocking bound");
        }
        status = LpStatus::Unbounded;
        break;
      }

      ++iter;
      clean_ = false;

      if (t_best <= cfg_.ratio_tol) {
        if (++degenerate_run >= cfg_.degeneracy_trip) bland = true;
      } else {
        degenerate_run = 0;
        if (bland) {
          bland = false;
          devex_.assign(total_, 1.0);
        }
      }

      if (r < 0) {
        // Bound flip: the entering variable crosses to its opposite bound.
        for (int k = 0; k < m_; ++k) {
          if (alpha[k] != 0.0) x_[basis_[k]] -= t_best * sigma * alpha[k];
        }
        status_[q] = sigma > 0 ? VarStatus::AtUpper : VarStatus::AtLower;
        x_[q] = sigma > 0 ? upper_[q] : lower_[q];
        continue;
      }

      // Devex weight update needs the pivot row before the basis changes.
      if (cfg_.devex && !bland) update_devex(q, r, alpha);

      const double x_q_new = x_[q] + sigma * t_best;
      for (int k = 0; k < m_; ++k) {
        if (alpha[k] != 0.0) x_[basis_[k]] -= t_best * sigma * alpha[k];
      }
      const int leaving = basis_[r];
      status_[leaving] = block_bound < 0 ? VarStatus::AtLower : VarStatus::AtUpper;
      x_[leaving] = block_bound < 0 ? lower_[leaving] : upper_[leaving];
      basis_[r] = q;
      status_[q] = VarStatus::Basic;
      x_[q] = x_q_new;

      if (std::abs(alpha[r]) < cfg_.ratio_tol) {
        refactorize();  // pivot too small for a stable eta
      } else {
        factor_.update(r, alpha);
      }
    }

    LpSolution sol;
    sol.status = status;
    sol.iterations = iter;
    sol.x.assign(x_.begin(), x_.begin() + n_);
    sol.basis = status_;
    if (status == LpStatus::Optimal) sol.objective = eval_objective(p_, sol.x);
    return sol;
  }

 private:
  double cost_of(int j) const { return j < n_ ? p_.cost[j] : 0.0; }

  double infeasibility_cost(int j) const {
    if (x_[j] < lower_[j] - cfg_.feas_tol) return -1.0;
    if (x_[j] > upper_[j] + cfg_.feas_tol) return 1.0;
    return 0.0;
  }

  double max_infeasibility() const {
    double worst = 0.0;
    for (int k = 0; k < m_; ++k) {
      const int j = basis_[k];
      worst = std::max(worst, lower_[j] - x_[j]);
      worst = std::max(worst, x_[j] - upper_[j]);
    }
    return worst;
  }

  double col_dot(const Eigen::VectorXd& y, int j) const {
    if (j >= n_) return y[j - n_];
    double s = 0.0;
    for (int k = col_starts_[j]; k < col_starts_[j + 1]; ++k) {
      s += y[col_rows_[k]] * col_vals_[k];
    }
    return s;
  }

  void scatter_col(int j, Eigen::VectorXd& v) const {
    if (j >= n_) {
      v[j - n_] += 1.0;
      return;
    }
    for (int k = col_starts_[j]; k < col_starts_[j + 1]; ++k) {
      v[col_rows_[k]] += col_vals_[k];
    }
  }

  void demote(int j) {
    if (std::isfinite(lower_[j]) && std::isfinite(upper_[j])) {
      status_[j] = std::abs(lower_[j]) <= std::abs(upper_[j]) ? VarStatus::AtLower
                                                              : VarStatus::AtUpper;
    } else if (std::isfinite(lower_[j])) {
      status_[j] = VarStatus::AtLower;
    } else if (std::isfinite(upper_[j])) {
      status_[j] = VarStatus::AtUpper;
    } else {
      status_[j] = VarStatus::Free;
    }
    x_[j] = nonbasic_value(j);
  }

  double nonbasic_value(int j) const {
    switch (status_[j]) {
      case VarStatus::AtLower: return lower_[j];
      case VarStatus::AtUpper: return upper_[j];
      default: return 0.0;
    }
  }

  void init_basis(const std::vector<VarStatus>* warm) {
    status_.assign(total_, VarStatus::AtLower);
    x_.assign(total_, 0.0);
    basis_.clear();

    if (warm && static_cast<int>(warm->size()) == total_) {
      status_ = *warm;
      int basics = 0;
      for (const VarStatus st : status_) basics += st == VarStatus::Basic ? 1 : 0;
      // Repair a hint with the wrong basic count: demote extras from the top,
      // then promote missing slacks from the bottom.
      for (int j = total_ - 1; j >= 0 && basics > m_; --j) {
        if (status_[j] == VarStatus::Basic) {
          demote(j);
          --basics;
        }
      }
      for (int i = 0; i < m_ && basics < m_; ++i) {
        if (status_[n_ + i] != VarStatus::Basic) {
          status_[n_ + i] = VarStatus::Basic;
          ++basics;
        }
      }
    } else {
      for (int j = 0; j < n_; ++j) demote(j);
      for (int i = 0; i < m_; ++i) status_[n_ + i] = VarStatus::Basic;
    }

    for (int j = 0; j < total_; ++j) {
      if (status_[j] == VarStatus::Basic) {
        basis_.push_back(j);
      } else {
        x_[j] = nonbasic_value(j);
      }
    }
    if (static_cast<int>(basis_.size()) != m_) {
      throw InternalError("basis header size mismatch");
    }
  }

  void refactorize() {
    for (int attempt = 0; attempt < 4; ++attempt) {
      std::vector<SparseColumn> cols(m_);
      for (int k = 0; k < m_; ++k) {
        const int j = basis_[k];
        if (j >= n_) {
          cols[k] = {{j - n_, 1.0}};
        } else {
          for (int idx = col_starts_[j]; idx < col_starts_[j + 1]; ++idx) {
            cols[k].emplace_back(col_rows_[idx], col_vals_[idx]);
          }
        }
      }
      const BasisFactor::Deficiency d = factor_.factorize(cols);
      if (d.ok()) {
        recompute_basics();
        clean_ = true;
        return;
      }
      // Swap each unpivoted position for the slack of an unpivoted row.
      for (std::size_t i = 0; i < d.positions.size(); ++i) {
        const int pos = d.positions[i];
        const int slack = n_ + d.rows[i];
        demote(basis_[pos]);
        if (status_[slack] == VarStatus::Basic) {
          throw NumericError("basis repair failed: slack already basic");
        }
        basis_[pos] = slack;
        status_[slack] = VarStatus::Basic;
      }
    }
    throw NumericError("basis repeatedly singular after repair");
  }

  void recompute_basics() {
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m_);
    for (int i = 0; i < m_; ++i) rhs[i] = p_.rhs[i];
    for (int j = 0; j < total_; ++j) {
      if (status_[j] == VarStatus::Basic || x_[j] == 0.0) continue;
      if (j >= n_) {
        rhs[j - n_] -= x_[j];
      } else {
        for (int k = col_starts_[j]; k < col_starts_[j + 1]; ++k) {
          rhs[col_rows_[k]] -= col_vals_[k] * x_[j];
        }
      }
    }
    factor_.ftran(rhs);
    for (int k = 0; k < m_; ++k) x_[basis_[k]] = rhs[k];
  }

  void update_devex(int q, int r, const Eigen::VectorXd& alpha) {
    Eigen::VectorXd z = Eigen::VectorXd::Zero(m_);
    z[r] = 1.0;
    factor_.btran(z);
    const double alpha_rq = alpha[r];
    const double wq = devex_[q];
    double wmax = 1.0;
    for (int j = 0; j < total_; ++j) {
      if (status_[j] == VarStatus::Basic || j == q) continue;
      const double arj = col_dot(z, j);
      if (arj == 0.0) continue;
      const double cand = (arj / alpha_rq) * (arj / alpha_rq) * wq;
      if (cand > devex_[j]) devex_[j] = cand;
      wmax = std::max(wmax, devex_[j]);
    }
    devex_[basis_[r]] = std::max(wq / (alpha_rq * alpha_rq), 1.0);
    wmax = std::max(wmax, devex_[basis_[r]]);
    if (wmax > 1e12) devex_.assign(total_, 1.0);
  }

  const LpProblem& p_;
  LpConfig cfg_;
  int n_ = 0, m_ = 0, total_ = 0;
  std::vector<int> col_starts_, col_rows_;
  std::vector<double> col_vals_;
  std::vector<double> lower_, upper_;

  std::vector<VarStatus> status_;
  std::vector<int> basis_;
  std::vector<double> x_;
  std::vector<double> devex_;
  BasisFactor factor_;
  bool clean_ = false;
};

inline LpSolution solve_lp(const LpProblem& p, const LpConfig& cfg = {},
                           const std::vector<VarStatus>* warm = nullptr) {
  p.validate();
  SimplexSolver solver(p, cfg);
  return solver.solve(warm);
}

}  // namespace wandcal::lp
