#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "wandcal/core.hpp"

namespace wandcal::lp {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// min c.x  subject to  A x <= b,  lo <= x <= hi.
/// Rows are stored sparse (CSR); bounds may be infinite on either side.
struct LpProblem {
  std::vector<double> cost;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<int> row_starts{0};
  std::vector<int> row_cols;
  std::vector<double> row_vals;
  std::vector<double> rhs;

  int num_vars() const { return static_cast<int>(cost.size()); }
  int num_rows() const { return static_cast<int>(rhs.size()); }

  int add_variable(double lo, double hi, double c) {
    if (std::isnan(lo) || std::isnan(hi) || !std::isfinite(c)) {
      throw InvalidArgumentError("variable bounds/cost must not be NaN");
    }
    if (lo > hi) throw InvalidArgumentError("variable has lo > hi");
    lower.push_back(lo);
    upper.push_back(hi);
    cost.push_back(c);
    return num_vars() - 1;
  }

  void add_row(const std::vector<std::pair<int, double>>& terms, double b) {
    if (terms.empty()) throw InvalidArgumentError("empty constraint row");
    if (!std::isfinite(b)) throw InvalidArgumentError("row rhs must be finite");
    for (const auto& [col, val] : terms) {
      if (col < 0 || col >= num_vars()) {
        throw InvalidArgumentError("row references unknown variable " +
                                   std::to_string(col));
      }
      if (!std::isfinite(val)) {
        throw InvalidArgumentError("row coefficient must be finite");
      }
      row_cols.push_back(col);
      row_vals.push_back(val);
    }
    row_starts.push_back(static_cast<int>(row_cols.size()));
    rhs.push_back(b);
  }

  void validate() const {
    for (int j = 0; j < num_vars(); ++j) {
      if (lower[j] > upper[j]) throw InvalidArgumentError("variable lo > hi");
    }
    for (int i = 0; i < num_rows(); ++i) {
      if (row_starts[i] == row_starts[i + 1]) {
        throw InvalidArgumentError("empty constraint row");
      }
    }
  }
};

enum class LpStatus { Optimal, Infeasible, Unbounded, IterationLimit };

inline const char* to_string(LpStatus status) {
  switch (status) {
    case LpStatus::Optimal: return "optimal";
    case LpStatus::Infeasible: return "infeasible";
    case LpStatus::Unbounded: return "unbounded";
    case LpStatus::IterationLimit: return "iteration-limit";
  }
  return "unknown";
}

/// Position of a variable (structural or slack) relative to the basis.
enum class VarStatus : std::uint8_t { AtLower, AtUpper, Basic, Free };

struct LpSolution {
  LpStatus status = LpStatus::IterationLimit;
  std::vector<double> x;
  double objective = std::numeric_limits<double>::quiet_NaN();
  long iterations = 0;
  /// Final status of every column (num_vars structural + num_rows slack);
  /// feed back into solve_lp as a warm start.
  std::vector<VarStatus> basis;
};

inline double eval_objective(const LpProblem& p, const std::vector<double>& x) {
  CompensatedSum total;
  for (int j = 0; j < p.num_vars(); ++j) total.add(p.cost[j] * x[j]);
  return total.value();
}

/// Largest violation of any row or bound at x (0 when feasible).
inline double check_feasible(const LpProblem& p, const std::vector<double>& x) {
  double worst = 0.0;
  for (int j = 0; j < p.num_vars(); ++j) {
    worst = std::max(worst, p.lower[j] - x[j]);
    worst = std::max(worst, x[j] - p.upper[j]);
  }
  for (int i = 0; i < p.num_rows(); ++i) {
    CompensatedSum ax;
    for (int k = p.row_starts[i]; k < p.row_starts[i + 1]; ++k) {
      ax.add(p.row_vals[k] * x[p.row_cols[k]]);
    }
    worst = std::max(worst, ax.value() - p.rhs[i]);
  }
  return std::max(worst, 0.0);
}

}  // namespace wandcal::lp
