#pragma once

// Self-check for the simplex core: random small LPs solved twice, once by
// the production solver and once by brute-force vertex enumeration. Ships
// with the library so an installation can vet its own arithmetic (the CLI
// exposes it as `lp-selftest`); the unit tests drive the same generator.

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "wandcal/lp/enumerate.hpp"
#include "wandcal/lp/problem.hpp"
#include "wandcal/lp/simplex.hpp"

namespace wandcal::lp {

struct RandomLp {
  LpProblem p;
  std::vector<double> interior;  // in-box point; feasible when built_feasible
  bool built_feasible = false;
};

/// Random box-bounded LP with up to 6 variables and 8 rows. When
/// `force_feasible`, every row is offset outward from an interior point so
/// the problem is feasible by construction; otherwise rows may cut the box
/// off entirely.
inline RandomLp make_random_lp(std::mt19937_64& rng, bool force_feasible) {
  std::uniform_int_distribution<int> nvars(1, 6);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::uniform_real_distribution<double> coef(-2.0, 2.0);

  RandomLp out;
  const int n = nvars(rng);
  std::uniform_int_distribution<int> nrows(0, 8);
  const int m = nrows(rng);

  for (int j = 0; j < n; ++j) {
    const double lo = -5.0 * u01(rng);
    double hi = lo + 0.5 + 5.5 * u01(rng);
    if (u01(rng) < 0.05) hi = lo;  // occasionally a fixed variable
    double c = coef(rng);
    if (u01(rng) < 0.1) c = 0.0;
    out.p.add_variable(lo, hi, c);
  }

  out.interior.resize(n);
  for (int j = 0; j < n; ++j) {
    out.interior[j] =
        out.p.lower[j] + u01(rng) * (out.p.upper[j] - out.p.lower[j]);
  }

  out.built_feasible = true;
  for (int i = 0; i < m; ++i) {
    std::vector<std::pair<int, double>> terms;
    double ax0 = 0.0;
    for (int j = 0; j < n; ++j) {
      if (u01(rng) < 0.6 || (j == n - 1 && terms.empty())) {
        double v = coef(rng);
        if (std::abs(v) < 0.1) v = v < 0 ? -0.1 : 0.1;
        terms.emplace_back(j, v);
        ax0 += v * out.interior[j];
      }
    }
    double b;
    if (force_feasible) {
      b = ax0 + 2.0 * u01(rng);
    } else {
      b = ax0 + 2.0 * u01(rng) - 1.5;  // may slice away the whole box
      if (b < ax0) out.built_feasible = false;
    }
    out.p.add_row(terms, b);
  }
  return out;
}

struct LpSelftestReport {
  int instances = 0;
  int feasible = 0;
  int infeasible = 0;
  double max_objective_deviation = 0.0;
  double max_feasibility_violation = 0.0;
  std::vector<std::string> failures;  // one line per disagreement

  bool passed() const { return failures.empty(); }
};

/// Solves `instances` random LPs and compares each against the enumeration
/// oracle: status must agree, optimal objectives must match within 1e-8,
/// and every "optimal" point must satisfy its constraints within 1e-7.
inline LpSelftestReport run_lp_selftest(int instances = 200,
                                        std::uint64_t seed = 223) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  LpSelftestReport report;
  report.instances = instances;

  for (int trial = 0; trial < instances; ++trial) {
    const bool force_feasible = u01(rng) < 0.8;
    const RandomLp random_lp = make_random_lp(rng, force_feasible);
    const EnumerationResult oracle = enumerate_lp(random_lp.p);
    const LpSolution sol = solve_lp(random_lp.p);

    auto fail = [&](const std::string& what) {
      std::ostringstream line;
      line << "instance " << trial << " (" << random_lp.p.num_vars()
           << " vars, " << random_lp.p.num_rows() << " rows): " << what;
      report.failures.push_back(line.str());
    };

    if (!oracle.feasible) {
      ++report.infeasible;
      if (sol.status != LpStatus::Infeasible) {
        fail(std::string("oracle says infeasible, solver returned ") +
             to_string(sol.status));
      }
      continue;
    }
    ++report.feasible;
    if (sol.status != LpStatus::Optimal) {
      fail(std::string("oracle says feasible, solver returned ") +
           to_string(sol.status));
      continue;
    }
    const double deviation = std::abs(sol.objective - oracle.objective);
    const double violation = check_feasible(random_lp.p, sol.x);
    report.max_objective_deviation =
        std::max(report.max_objective_deviation, deviation);
    report.max_feasibility_violation =
        std::max(report.max_feasibility_violation, violation);
    if (deviation > 1e-8) {
      std::ostringstream what;
      what << "objective " << sol.objective << " vs oracle "
           << oracle.objective;
      fail(what.str());
    }
    if (violation > 1e-7) {
      std::ostringstream what;
      what << "optimal point violates constraints by " << violation;
      fail(what.str());
    }
  }
  return report;
}

}  // namespace wandcal::lp
