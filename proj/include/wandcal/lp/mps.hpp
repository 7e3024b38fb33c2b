#pragma once

#include <cstdio>
#include <ostream>
#include <string>

#include "wandcal/lp/problem.hpp"

namespace wandcal::lp {

namespace detail {
inline std::string mps_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}
inline std::string mps_field(const std::string& s, int width) {
  std::string out = s;
  if (static_cast<int>(out.size()) < width) out.resize(width, ' ');
  return out;
}
}  // namespace detail

/// Writes the problem in fixed-column MPS so it can be cross-checked with
/// external solvers. Rows are named R<i>, variables C<j>, all minimization.
inline void write_mps(const LpProblem& p, std::ostream& os,
                      const std::string& name = "WANDCAL") {
  using detail::mps_field;
  using detail::mps_number;

  const auto row_name = [](int i) { return "R" + std::to_string(i); };
  const auto col_name = [](int j) { return "C" + std::to_string(j); };

  os << "NAME          " << name << "\n";
  os << "ROWS\n";
  os << " N  COST\n";
  for (int i = 0; i < p.num_rows(); ++i) {
    os << " L  " << row_name(i) << "\n";
  }

  // Column-major traversal of the row-sparse storage.
  std::vector<std::vector<std::pair<int, double>>> cols(p.num_vars());
  for (int i = 0; i < p.num_rows(); ++i) {
    for (int k = p.row_starts[i]; k < p.row_starts[i + 1]; ++k) {
      cols[p.row_cols[k]].emplace_back(i, p.row_vals[k]);
    }
  }
  os << "COLUMNS\n";
  for (int j = 0; j < p.num_vars(); ++j) {
    if (p.cost[j] != 0.0) {
      os << "    " << mps_field(col_name(j), 10) << mps_field("COST", 10)
         << mps_number(p.cost[j]) << "\n";
    }
    for (const auto& [i, val] : cols[j]) {
      os << "    " << mps_field(col_name(j), 10) << mps_field(row_name(i), 10)
         << mps_number(val) << "\n";
    }
  }

  os << "RHS\n";
  for (int i = 0; i < p.num_rows(); ++i) {
    os << "    " << mps_field("RHS", 10) << mps_field(row_name(i), 10)
       << mps_number(p.rhs[i]) << "\n";
  }

  os << "BOUNDS\n";
  for (int j = 0; j < p.num_vars(); ++j) {
    const double lo = p.lower[j], hi = p.upper[j];
    if (!std::isfinite(lo) && !std::isfinite(hi)) {
      os << " FR " << mps_field("BND", 10) << col_name(j) << "\n";
      continue;
    }
    if (lo == hi) {
      os << " FX " << mps_field("BND", 10) << mps_field(col_name(j), 10)
         << mps_number(lo) << "\n";
      continue;
    }
    if (std::isfinite(lo)) {
      os << " LO " << mps_field("BND", 10) << mps_field(col_name(j), 10)
         << mps_number(lo) << "\n";
    } else {
      os << " MI " << mps_field("BND", 10) << col_name(j) << "\n";
    }
    if (std::isfinite(hi)) {
      os << " UP " << mps_field("BND", 10) << mps_field(col_name(j), 10)
         << mps_number(hi) << "\n";
    }
  }
  os << "ENDATA\n";
}

}  // namespace wandcal::lp
