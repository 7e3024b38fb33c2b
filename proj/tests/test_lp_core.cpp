#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <random>
#include <sstream>

#include "wandcal/lp/selftest.hpp"
#include "wandcal/lp/enumerate.hpp"
#include "wandcal/lp/factor.hpp"
#include "wandcal/lp/mps.hpp"
#include "wandcal/lp/simplex.hpp"

namespace {

using namespace wandcal;
using namespace wandcal::lp;

Eigen::MatrixXd dense_of(const std::vector<SparseColumn>& cols) {
  const int m = static_cast<int>(cols.size());
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(m, m);
  for (int j = 0; j < m; ++j) {
    for (const auto& [i, v] : cols[j]) b(i, j) += v;
  }
  return b;
}

std::vector<SparseColumn> random_sparse_matrix(std::mt19937_64& rng, int m,
                                               double density) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::uniform_real_distribution<double> val(-3.0, 3.0);
  // Nonsingular by construction: a random permutation carries the diagonal.
  std::vector<int> perm(m);
  for (int i = 0; i < m; ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<SparseColumn> cols(m);
  for (int j = 0; j < m; ++j) {
    cols[j].push_back({perm[j], 1.0 + u01(rng)});
    for (int i = 0; i < m; ++i) {
      if (i != perm[j] && u01(rng) < density) cols[j].push_back({i, 0.3 * val(rng)});
    }
  }
  return cols;
}

}  // namespace

TEST_CASE("BasisFactor solves against dense LU", "[lp][factor]") {
  std::mt19937_64 rng(201);
  std::uniform_real_distribution<double> val(-1.0, 1.0);

  for (const int m : {1, 2, 3, 8, 20, 60}) {
    for (int trial = 0; trial < 5; ++trial) {
      const auto cols = random_sparse_matrix(rng, m, 0.2);
      const Eigen::MatrixXd b = dense_of(cols);

      BasisFactor factor;
      REQUIRE(factor.factorize(cols).ok());

      Eigen::VectorXd v(m);
      for (int i = 0; i < m; ++i) v[i] = val(rng);

      Eigen::VectorXd z = v;
      factor.ftran(z);
      CAPTURE(m, trial);
      REQUIRE((b * z - v).cwiseAbs().maxCoeff() < 1e-9);

      Eigen::VectorXd w = v;
      factor.btran(w);
      REQUIRE((b.transpose() * w - v).cwiseAbs().maxCoeff() < 1e-9);
    }
  }
}

TEST_CASE("BasisFactor reports singular bases for repair", "[lp][factor]") {
  // Column 2 is a duplicate of column 0 -> structurally singular.
  std::vector<SparseColumn> cols(3);
  cols[0] = {{0, 1.0}, {1, 2.0}};
  cols[1] = {{1, 1.0}, {2, 1.0}};
  cols[2] = {{0, 1.0}, {1, 2.0}};
  BasisFactor factor;
  const auto d = factor.factorize(cols);
  REQUIRE_FALSE(d.ok());
  REQUIRE(d.positions.size() == d.rows.size());
  REQUIRE(d.positions.size() == 1);
}

TEST_CASE("BasisFactor product-form updates track column swaps", "[lp][factor]") {
  std::mt19937_64 rng(211);
  std::uniform_real_distribution<double> val(-1.0, 1.0);
  const int m = 25;

  auto cols = random_sparse_matrix(rng, m, 0.15);
  BasisFactor factor;
  REQUIRE(factor.factorize(cols).ok());

  for (int swap = 0; swap < 10; ++swap) {
    // Replace a random position with a fresh random column.
    std::uniform_int_distribution<int> pos_dist(0, m - 1);
    const int pos = pos_dist(rng);
    SparseColumn fresh;
    for (int i = 0; i < m; ++i) {
      if (val(rng) > 0.4) fresh.push_back({i, val(rng)});
    }
    fresh.push_back({pos_dist(rng), 1.5 + std::abs(val(rng))});

    Eigen::VectorXd alpha = Eigen::VectorXd::Zero(m);
    for (const auto& [i, v] : fresh) alpha[i] += v;
    factor.ftran(alpha);
    if (std::abs(alpha[pos]) < 1e-6) continue;  // would be a poor pivot
    factor.update(pos, alpha);
    cols[pos] = fresh;

    const Eigen::MatrixXd b = dense_of(cols);
    Eigen::VectorXd v(m);
    for (int i = 0; i < m; ++i) v[i] = val(rng);

    Eigen::VectorXd z = v;
    factor.ftran(z);
    CAPTURE(swap);
    REQUIRE((b * z - v).cwiseAbs().maxCoeff() < 1e-8);

    Eigen::VectorXd w = v;
    factor.btran(w);
    REQUIRE((b.transpose() * w - v).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("solve_lp frozen textbook cases", "[lp][simplex]") {
  SECTION("bound-active minimum") {
    LpProblem p;
    p.add_variable(1.0, 10.0, 1.0);
    const LpSolution sol = solve_lp(p);
    REQUIRE(sol.status == LpStatus::Optimal);
    REQUIRE(sol.x[0] == Catch::Approx(1.0).margin(1e-9));
    REQUIRE(sol.objective == Catch::Approx(1.0).margin(1e-9));
  }

  SECTION("textbook vertex on a facet") {
    LpProblem p;
    p.add_variable(0.0, 1.0, -1.0);
    p.add_variable(0.0, 1.0, -1.0);
    p.add_row({{0, 1.0}, {1, 1.0}}, 1.0);
    const LpSolution sol = solve_lp(p);
    REQUIRE(sol.status == LpStatus::Optimal);
    REQUIRE(sol.objective == Catch::Approx(-1.0).margin(1e-9));
    REQUIRE(sol.x[0] + sol.x[1] == Catch::Approx(1.0).margin(1e-9));
  }

  SECTION("free variable pinned by rows") {
    LpProblem p;
    p.add_variable(-kInfinity, kInfinity, 1.0);
    p.add_row({{0, -1.0}}, -3.0);  // -x <= -3  =>  x >= 3
    const LpSolution sol = solve_lp(p);
    REQUIRE(sol.status == LpStatus::Optimal);
    REQUIRE(sol.x[0] == Catch::Approx(3.0).margin(1e-8));
  }

  SECTION("unbounded below") {
    LpProblem p;
    p.add_variable(0.0, kInfinity, -1.0);
    const LpSolution sol = solve_lp(p);
    REQUIRE(sol.status == LpStatus::Unbounded);
  }

  SECTION("plainly infeasible rows") {
    LpProblem p;
    p.add_variable(0.0, 1.0, 1.0);
    p.add_row({{0, 1.0}}, -0.5);  // x <= -0.5 against x >= 0
    const LpSolution sol = solve_lp(p);
    REQUIRE(sol.status == LpStatus::Infeasible);
  }

  SECTION("degenerate overlapping constraints still finish") {
    LpProblem p;
    p.add_variable(0.0, 1.0, -1.0);
    p.add_variable(0.0, 1.0, -2.0);
    for (int i = 0; i < 4; ++i) p.add_row({{0, 1.0}, {1, 1.0}}, 1.0);
    p.add_row({{0, 1.0}}, 1.0);
    p.add_row({{1, 1.0}}, 1.0);
    const LpSolution sol = solve_lp(p);
    REQUIRE(sol.status == LpStatus::Optimal);
    REQUIRE(sol.objective == Catch::Approx(-2.0).margin(1e-9));
  }
}

TEST_CASE("check_feasible measures the worst violation", "[lp]") {
  LpProblem p;
  p.add_variable(0.0, 2.0, 1.0);
  p.add_variable(-1.0, 1.0, 0.0);
  p.add_row({{0, 1.0}, {1, 1.0}}, 2.0);

  REQUIRE(check_feasible(p, {1.0, 0.5}) == 0.0);
  REQUIRE(check_feasible(p, {2.5, 0.0}) == Catch::Approx(0.5));
  REQUIRE(check_feasible(p, {2.0, 1.0}) == Catch::Approx(1.0));  // row breach
  REQUIRE(check_feasible(p, {-0.25, 0.0}) == Catch::Approx(0.25));
}

TEST_CASE("random LPs match the vertex-enumeration oracle", "[lp][oracle]") {
  std::mt19937_64 rng(223);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  int infeasible_seen = 0;

  for (int trial = 0; trial < 200; ++trial) {
    const bool force_feasible = u01(rng) < 0.8;
    const auto random_lp = lp::make_random_lp(rng, force_feasible);
    const EnumerationResult oracle = enumerate_lp(random_lp.p);
    const LpSolution sol = solve_lp(random_lp.p);
    CAPTURE(trial, force_feasible, random_lp.p.num_vars(),
            random_lp.p.num_rows());

    if (!oracle.feasible) {
      ++infeasible_seen;
      REQUIRE(sol.status == LpStatus::Infeasible);
      continue;
    }
    REQUIRE(sol.status == LpStatus::Optimal);
    REQUIRE(sol.objective == Catch::Approx(oracle.objective).margin(1e-8));
    REQUIRE(check_feasible(random_lp.p, sol.x) <= 1e-7);
    if (random_lp.built_feasible) {
      // Weak-duality sanity against the constructed feasible point.
      REQUIRE(sol.objective <=
              eval_objective(random_lp.p, random_lp.interior) + 1e-7);
    }
  }
  REQUIRE(infeasible_seen > 0);  // the mix actually exercised both branches
}

TEST_CASE("solve_lp is deterministic", "[lp]") {
  std::mt19937_64 rng(227);
  const auto random_lp = lp::make_random_lp(rng, true);
  const LpSolution a = solve_lp(random_lp.p);
  const LpSolution b = solve_lp(random_lp.p);
  REQUIRE(a.status == b.status);
  REQUIRE(a.iterations == b.iterations);
  REQUIRE(a.x == b.x);  // bit-for-bit
}

TEST_CASE("scaling the objective preserves the argmin", "[lp]") {
  std::mt19937_64 rng(229);
  for (int trial = 0; trial < 20; ++trial) {
    const auto random_lp = lp::make_random_lp(rng, true);
    LpProblem scaled = random_lp.p;
    for (double& c : scaled.cost) c *= 5.0;
    const LpSolution a = solve_lp(random_lp.p);
    const LpSolution b = solve_lp(scaled);
    REQUIRE(a.status == LpStatus::Optimal);
    REQUIRE(b.status == LpStatus::Optimal);
    CAPTURE(trial);
    REQUIRE(b.objective == Catch::Approx(5.0 * a.objective).margin(1e-7));
  }
}

TEST_CASE("warm starts reach the same optimum", "[lp]") {
  std::mt19937_64 rng(233);
  for (int trial = 0; trial < 20; ++trial) {
    const auto random_lp = lp::make_random_lp(rng, true);
    const LpSolution cold = solve_lp(random_lp.p);
    REQUIRE(cold.status == LpStatus::Optimal);

    LpProblem nudged = random_lp.p;
    for (double& b : nudged.rhs) b += 0.01;
    const LpSolution warm = solve_lp(nudged, {}, &cold.basis);
    const LpSolution fresh = solve_lp(nudged);
    CAPTURE(trial);
    REQUIRE(warm.status == fresh.status);
    if (fresh.status == LpStatus::Optimal) {
      REQUIRE(warm.objective == Catch::Approx(fresh.objective).margin(1e-8));
    }
  }
}

TEST_CASE("structured absolute-value LP recovers a planted optimum", "[lp]") {
  // min sum t_i  s.t.  +-(a_i . y - c_i) <= t_i, with c_i = a_i . y0:
  // optimum 0 at y = y0. Mirrors the shape of the pose subproblem.
  std::mt19937_64 rng(239);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const int points = 40;

  LpProblem p;
  std::vector<int> t_vars, y_vars;
  for (int i = 0; i < points; ++i) t_vars.push_back(p.add_variable(0.0, 100.0, 1.0));
  for (int k = 0; k < 3; ++k) y_vars.push_back(p.add_variable(-10.0, 10.0, 0.0));

  const Eigen::Vector3d y0(0.7, -1.3, 2.1);
  for (int i = 0; i < points; ++i) {
    const Eigen::Vector3d a(u(rng), u(rng), u(rng));
    const double c = a.dot(y0);
    p.add_row({{y_vars[0], a[0]}, {y_vars[1], a[1]}, {y_vars[2], a[2]},
               {t_vars[i], -1.0}},
              c);
    p.add_row({{y_vars[0], -a[0]}, {y_vars[1], -a[1]}, {y_vars[2], -a[2]},
               {t_vars[i], -1.0}},
              -c);
  }

  const LpSolution sol = solve_lp(p);
  REQUIRE(sol.status == LpStatus::Optimal);
  REQUIRE(sol.objective == Catch::Approx(0.0).margin(1e-7));
  for (int k = 0; k < 3; ++k) {
    REQUIRE(sol.x[y_vars[k]] == Catch::Approx(y0[k]).margin(1e-6));
  }
}

TEST_CASE("MPS dump matches the expected fixed-column text", "[lp][mps]") {
  LpProblem p;
  p.add_variable(0.0, 1.0, -1.0);
  p.add_variable(-kInfinity, kInfinity, 2.0);
  p.add_row({{0, 1.0}, {1, -0.5}}, 3.0);

  std::ostringstream os;
  write_mps(p, os, "TINY");
  const std::string expected =
      "NAME          TINY\n"
      "ROWS\n"
      " N  COST\n"
      " L  R0\n"
      "COLUMNS\n"
      "    C0        COST      -1\n"
      "    C0        R0        1\n"
      "    C1        COST      2\n"
      "    C1        R0        -0.5\n"
      "RHS\n"
      "    RHS       R0        3\n"
      "BOUNDS\n"
      " LO BND       C0        0\n"
      " UP BND       C0        1\n"
      " FR BND       C1\n"
      "ENDATA\n";
  REQUIRE(os.str() == expected);
}

TEST_CASE("problem construction rejects malformed input", "[lp]") {
  LpProblem p;
  p.add_variable(0.0, 1.0, 0.0);
  REQUIRE_THROWS_AS(p.add_variable(2.0, 1.0, 0.0), InvalidArgumentError);
  REQUIRE_THROWS_AS(p.add_row({}, 0.0), InvalidArgumentError);
  REQUIRE_THROWS_AS(p.add_row({{5, 1.0}}, 0.0), InvalidArgumentError);
  REQUIRE_THROWS_AS(p.add_row({{0, 1.0}}, kInfinity), InvalidArgumentError);
}
