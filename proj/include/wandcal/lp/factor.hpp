#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "wandcal/core.hpp"

namespace wandcal::lp {

using SparseColumn = std::vector<std::pair<int, double>>;

/// LU factorization of a simplex basis with product-form updates.
///
/// The factorization is right-looking Markowitz elimination with threshold
/// partial pivoting, on a column-authoritative working copy (row patterns are
/// kept as supersets for pivot search only). L is stored as column etas in
/// pivot order, U as rows over later-pivoted positions.
///
/// Index spaces: constraint rows on one side, basis positions on the other.
/// ftran maps a row-indexed right-hand side to a position-indexed solution of
/// B z = v; btran maps a position-indexed rhs to a row-indexed solution of
/// B^T w = c.
class BasisFactor {
 public:
  struct Deficiency {
    std::vector<int> positions;  // basis positions left unpivoted
    std::vector<int> rows;       // rows left unpivoted (same count)
    bool ok() const { return positions.empty(); }
  };

  Deficiency factorize(const std::vector<SparseColumn>& cols) {
    m_ = static_cast<int>(cols.size());
    letas_.clear();
    urows_.clear();
    update_etas_.clear();

    std::vector<SparseColumn> acols = cols;
    std::vector<std::vector<int>> row_pattern(m_);
    std::vector<std::uint8_t> col_active(m_, 1), row_active(m_, 1);
    for (int j = 0; j < m_; ++j) {
      for (const auto& [i, v] : acols[j]) {
        if (i < 0 || i >= m_) throw InvalidArgumentError("column row out of range");
        row_pattern[i].push_back(j);
      }
    }

    Eigen::VectorXd work = Eigen::VectorXd::Zero(m_);
    std::vector<std::uint8_t> in_col(m_, 0);
    std::vector<int> touched;

    for (int step = 0; step < m_; ++step) {
      // --- Pivot search: scan ascending column counts, limited candidates.
      int cmin = m_ + 1;
      for (int j = 0; j < m_; ++j) {
        if (col_active[j] && !acols[j].empty()) {
          cmin = std::min(cmin, static_cast<int>(acols[j].size()));
        }
      }
      if (cmin > m_) break;  // nothing left to pivot

      int best_col = -1, best_row = -1;
      double best_val = 0.0;
      long best_merit = std::numeric_limits<long>::max();
      int examined = 0;
      for (int level = cmin; level <= m_; ++level) {
        for (int j = 0; j < m_; ++j) {
          if (!col_active[j] || static_cast<int>(acols[j].size()) != level) continue;
          double amax = 0.0;
          for (const auto& [i, v] : acols[j]) amax = std::max(amax, std::abs(v));
          if (amax < kAbsPivotTol) continue;
          for (const auto& [i, v] : acols[j]) {
            if (std::abs(v) < kThreshold * amax) continue;
            const long merit = static_cast<long>(level - 1) *
                               (static_cast<long>(row_pattern[i].size()) - 1);
            if (merit < best_merit ||
                (merit == best_merit && std::abs(v) > std::abs(best_val))) {
              best_merit = merit;
              best_col = j;
              best_row = i;
              best_val = v;
            }
          }
          ++examined;
        }
        if (best_col >= 0 &&
            (examined >= 8 ||
             best_merit <= static_cast<long>(level - 1) * (level - 1))) {
          break;
        }
      }
      if (best_col < 0) break;  // remaining block numerically singular

      const int pr = best_row, pc = best_col;
      const double pv = best_val;

      // --- Gather pivot column into an L eta (unit-diagonal multipliers).
      LEta leta;
      leta.pivot_row = pr;
      for (const auto& [i, v] : acols[pc]) {
        if (i != pr) leta.entries.push_back({i, v / pv});
      }

      // --- Gather pivot row into a U row, removing it from the active cols.
      URow urow;
      urow.pivot_row = pr;
      urow.pivot_pos = pc;
      urow.pivot_val = pv;
      for (const int j : row_pattern[pr]) {
        if (j == pc || !col_active[j]) continue;
        auto& col = acols[j];
        for (std::size_t k = 0; k < col.size(); ++k) {
          if (col[k].first == pr) {
            urow.entries.emplace_back(j, col[k].second);
            col[k] = col.back();
            col.pop_back();
            break;
          }
        }
      }

      // --- Right-looking update of the remaining submatrix.
      for (const auto& [j, u] : urow.entries) {
        auto& col = acols[j];
        touched.clear();
        for (const auto& [i, v] : col) {
          work[i] = v;
          in_col[i] = 1;
          touched.push_back(i);
        }
        for (const auto& le : leta.entries) {
          work[le.row] -= le.val * u;
          if (!in_col[le.row]) {
            in_col[le.row] = 1;
            touched.push_back(le.row);
            row_pattern[le.row].push_back(j);  // fill-in
          }
        }
        col.clear();
        for (const int i : touched) {
          if (std::abs(work[i]) > kDropTol) col.emplace_back(i, work[i]);
          work[i] = 0.0;
          in_col[i] = 0;
        }
      }

      acols[pc].clear();
      row_pattern[pr].clear();
      col_active[pc] = 0;
      row_active[pr] = 0;
      letas_.push_back(std::move(leta));
      urows_.push_back(std::move(urow));
    }

    Deficiency d;
    for (int j = 0; j < m_; ++j) {
      if (col_active[j]) d.positions.push_back(j);
    }
    for (int i = 0; i < m_; ++i) {
      if (row_active[i]) d.rows.push_back(i);
    }
    return d;
  }

  /// Solves B z = v. Input indexed by row, output indexed by basis position.
  void ftran(Eigen::VectorXd& v) const {
    for (const auto& le : letas_) {
      const double t = v[le.pivot_row];
      if (t != 0.0) {
        for (const auto& e : le.entries) v[e.row] -= e.val * t;
      }
    }
    Eigen::VectorXd z = Eigen::VectorXd::Zero(m_);
    for (int k = static_cast<int>(urows_.size()) - 1; k >= 0; --k) {
      const URow& ur = urows_[k];
      double s = v[ur.pivot_row];
      for (const auto& [pos, u] : ur.entries) s -= u * z[pos];
      z[ur.pivot_pos] = s / ur.pivot_val;
    }
    v = std::move(z);
    for (const auto& eta : update_etas_) {
      const double t = v[eta.position] / eta.pivot;
      if (t != 0.0) {
        for (const auto& [i, a] : eta.entries) v[i] -= a * t;
      }
      v[eta.position] = t;
    }
  }

  /// Solves B^T w = c. Input indexed by basis position, output by row.
  void btran(Eigen::VectorXd& v) const {
    for (int k = static_cast<int>(update_etas_.size()) - 1; k >= 0; --k) {
      const UpdateEta& eta = update_etas_[k];
      double s = 0.0;
      for (const auto& [i, a] : eta.entries) s += a * v[i];
      v[eta.position] = (v[eta.position] - s) / eta.pivot;
    }
    Eigen::VectorXd w = Eigen::VectorXd::Zero(m_);
    for (const URow& ur : urows_) {
      const double t = v[ur.pivot_pos] / ur.pivot_val;
      w[ur.pivot_row] = t;
      if (t != 0.0) {
        for (const auto& [pos, u] : ur.entries) v[pos] -= u * t;
      }
    }
    for (int k = static_cast<int>(letas_.size()) - 1; k >= 0; --k) {
      const LEta& le = letas_[k];
      double s = 0.0;
      for (const auto& e : le.entries) s += e.val * w[e.row];
      w[le.pivot_row] -= s;
    }
    v = std::move(w);
  }

  /// Registers the basis change "column at `position` becomes the column whose
  /// ftran image is `alpha`" as a product-form eta.
  void update(int position, const Eigen::VectorXd& alpha) {
    UpdateEta eta;
    eta.position = position;
    eta.pivot = alpha[position];
    if (std::abs(eta.pivot) < kAbsPivotTol) {
      throw NumericError("basis update pivot too small");
    }
    for (int i = 0; i < m_; ++i) {
      if (i != position && std::abs(alpha[i]) > kDropTol) {
        eta.entries.emplace_back(i, alpha[i]);
      }
    }
    update_etas_.push_back(std::move(eta));
  }

  int update_count() const { return static_cast<int>(update_etas_.size()); }
  int dim() const { return m_; }

 private:
  static constexpr double kThreshold = 0.1;     // partial-pivot ratio
  static constexpr double kAbsPivotTol = 1e-11;
  static constexpr double kDropTol = 1e-14;

  struct LEntry {
    int row;
    double val;
  };
  struct LEta {
    int pivot_row = -1;
    std::vector<LEntry> entries;
  };
  struct URow {
    int pivot_row = -1;
    int pivot_pos = -1;
    double pivot_val = 0.0;
    std::vector<std::pair<int, double>> entries;  // later-pivoted positions
  };
  struct UpdateEta {
    int position = -1;
    double pivot = 0.0;
    std::vector<std::pair<int, double>> entries;
  };

  int m_ = 0;
  std::vector<LEta> letas_;
  std::vector<URow> urows_;
  std::vector<UpdateEta> update_etas_;
};

}  // namespace wandcal::lp
