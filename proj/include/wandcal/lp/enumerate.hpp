#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <vector>

#include "wandcal/core.hpp"
#include "wandcal/lp/problem.hpp"

namespace wandcal::lp {

struct EnumerationResult {
  bool feasible = false;
  double objective = std::numeric_limits<double>::infinity();
  std::vector<double> x;
};

/// Brute-force LP oracle: enumerate every candidate vertex, i.e. every
/// full-rank subset of num_vars active constraints drawn from {rows as
/// equalities, lower bounds, upper bounds}, and keep the feasible one with
/// the smallest objective. Exponential in problem size by design — intended
/// for cross-checking solve_lp on problems with a handful of variables.
inline EnumerationResult enumerate_lp(const LpProblem& p,
                                      double feas_tol = 1e-9) {
  const int n = p.num_vars();
  const int m = p.num_rows();

  // Candidate active constraints as (normal, offset) pairs.
  std::vector<Eigen::VectorXd> normals;
  std::vector<double> offsets;
  for (int i = 0; i < m; ++i) {
    Eigen::VectorXd a = Eigen::VectorXd::Zero(n);
    for (int k = p.row_starts[i]; k < p.row_starts[i + 1]; ++k) {
      a[p.row_cols[k]] += p.row_vals[k];
    }
    normals.push_back(a);
    offsets.push_back(p.rhs[i]);
  }
  for (int j = 0; j < n; ++j) {
    if (std::isfinite(p.lower[j])) {
      Eigen::VectorXd a = Eigen::VectorXd::Zero(n);
      a[j] = 1.0;
      normals.push_back(a);
      offsets.push_back(p.lower[j]);
    }
    if (std::isfinite(p.upper[j])) {
      Eigen::VectorXd a = Eigen::VectorXd::Zero(n);
      a[j] = 1.0;
      normals.push_back(a);
      offsets.push_back(p.upper[j]);
    }
  }

  const int total = static_cast<int>(normals.size());
  if (total < n) {
    throw InvalidArgumentError("enumeration oracle needs at least n constraints");
  }

  EnumerationResult best;
  std::vector<int> pick(n);
  for (int i = 0; i < n; ++i) pick[i] = i;

  const auto advance = [&]() -> bool {
    int i = n - 1;
    while (i >= 0 && pick[i] == total - n + i) --i;
    if (i < 0) return false;
    ++pick[i];
    for (int k = i + 1; k < n; ++k) pick[k] = pick[k - 1] + 1;
    return true;
  };

  do {
    Eigen::MatrixXd mat(n, n);
    Eigen::VectorXd rhs(n);
    for (int i = 0; i < n; ++i) {
      mat.row(i) = normals[pick[i]].transpose();
      rhs[i] = offsets[pick[i]];
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(mat);
    if (lu.rank() < n) continue;
    const Eigen::VectorXd x = lu.solve(rhs);
    if (!x.allFinite()) continue;

    bool ok = true;
    for (int j = 0; j < n && ok; ++j) {
      ok = x[j] >= p.lower[j] - feas_tol && x[j] <= p.upper[j] + feas_tol;
    }
    for (int i = 0; i < m && ok; ++i) {
      double ax = 0.0;
      for (int k = p.row_starts[i]; k < p.row_starts[i + 1]; ++k) {
        ax += p.row_vals[k] * x[p.row_cols[k]];
      }
      ok = ax <= p.rhs[i] + feas_tol;
    }
    if (!ok) continue;

    double obj = 0.0;
    for (int j = 0; j < n; ++j) obj += p.cost[j] * x[j];
    if (!best.feasible || obj < best.objective) {
      best.feasible = true;
      best.objective = obj;
      best.x.assign(x.data(), x.data() + n);
    }
  } while (advance());

  return best;
}

}  // namespace wandcal::lp
