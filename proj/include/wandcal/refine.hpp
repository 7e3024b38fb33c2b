#pragma once

// The alternating refinement loop. Each outer iteration runs two stages:
//   (a) per-camera Levenberg-Marquardt over the Euler angles, markers and
//       translations held fixed — independent 3-parameter problems;
//   (b) one linear program over all markers and translations, angles held
//       fixed — the absolute-residual subproblem with anti-collapse rows.
//
// Three measures keep the alternation pointed at the joint minimum instead
// of the pathologies the split objectives invite:
//
//   Gauge canonicalization. Residuals are invariant under a rigid shift of
//   the scene (markers +c, translations -R_n c) and jointly homogeneous
//   under its scaling, so the LP can always cut its objective by shrinking
//   everything toward the height margin — motions that say nothing about
//   geometry. Every candidate is therefore mapped back to a fixed gauge
//   (protocol wand length, marker centroid pinned at its initial position)
//   before it is measured, so all recorded metrics share one frame and the
//   free directions cannot ratchet the scene off to infinity.
//
//   Trust region. An unrestricted LP jumps to an extreme vertex of the
//   absolute-error polytope — typically a sparse-interpolation point far
//   from the incumbent that is terrible in E. Stage (b) instead tightens
//   the variable boxes to incumbent ± radius, which also caps how much of
//   the scale gauge motion a single step can contain.
//
//   Lookahead acceptance. Stage (b) minimizes the LAE, not the squared
//   error E the loop reports, and the two minima are only known to
//   coincide under unstated conditions. Judging an LP step by E at frozen
//   angles deadlocks as soon as the L1 and L2 descent directions disagree,
//   so the driver re-solves the angles against each candidate first and
//   accepts iff the end-of-iteration E does not increase. On rejection the
//   trust radius shrinks and the LP is re-solved; if no radius yields an
//   acceptable step, the driver rolls back and stops instead of
//   oscillating, reporting the LAE/LSE divergence.
//
// The LP basis from each solve seeds the next. Near convergence successive
// subproblems differ only by small angle updates, so the warm basis is
// optimal or nearly so and the solve costs a handful of pivots.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "wandcal/lm_solver.hpp"
#include "wandcal/lp/simplex.hpp"
#include "wandcal/lp/subproblem.hpp"
#include "wandcal/observations.hpp"
#include "wandcal/residuals.hpp"
#include "wandcal/state.hpp"

namespace wandcal {

struct RefineConfig {
  int max_iterations = 100;
  double rel_tol = 1e-8;  // stop when E decreases by less than this fraction
  double trust_radius = 0.25;  // largest per-coordinate LP move, scene units
  LmConfig lm;
  lp::LpConfig lp;
  lp::SubproblemConfig subproblem;
  ScaleEstimator scale_estimator = ScaleEstimator::Mean;
  bool parallel_angles = false;  // run stage (a) with one thread per camera

  void validate() const {
    if (max_iterations < 1 || !(rel_tol > 0.0)) {
      throw InvalidArgumentError("RefineConfig: invalid loop settings");
    }
    if (!std::isfinite(trust_radius) || trust_radius <= 0.0) {
      throw InvalidArgumentError("RefineConfig: trust_radius must be > 0");
    }
    lm.validate();
  }
};

enum class RefineStop {
  Converged,         // relative E decrease fell below rel_tol
  IterationLimit,    // max_iterations exhausted
  LaeLseDivergence,  // every trust radius raised E; rolled back and halted
  LpFailure,         // subproblem did not solve to optimality
};

inline const char* to_string(RefineStop stop) {
  switch (stop) {
    case RefineStop::Converged: return "converged";
    case RefineStop::IterationLimit: return "iteration-limit";
    case RefineStop::LaeLseDivergence: return "LAE/LSE divergence";
    case RefineStop::LpFailure: return "LP failure";
  }
  return "unknown";
}

struct RefineIteration {
  int iteration = 0;  // 1-based
  double e = 0.0;     // E at the accepted state after this iteration
  double lae = 0.0;
  double p = std::numeric_limits<double>::quiet_NaN();  // NaN if unavailable
  double length_std = 0.0;
  double ms_angles = 0.0;
  double ms_lp = 0.0;
};

struct RefineReport {
  std::vector<RefineIteration> iterations;
  double initial_e = 0.0;
  double final_e = 0.0;
  double scale = 1.0;  // factor applied by the closing recover_scale
  RefineStop stop = RefineStop::IterationLimit;
  std::string message;  // diagnostics: LP failures, omitted P values
};

struct RefineResult {
  SceneState state;
  RefineReport report;
};

namespace detail {

inline double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now() - since)
      .count();
}

inline Eigen::Vector3d marker_centroid(const SceneState& state) {
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  for (const auto& marker : state.markers) sum += marker;
  return sum / static_cast<double>(state.markers.size());
}

// Maps a state to the fixed gauge every comparison uses: mean wand length
// equal to the protocol length, marker centroid at `anchor`. Both motions
// are exact symmetries of the residuals, so this changes no reprojection.
inline void canonicalize_gauge(SceneState& state, double wand_length,
                               ScaleEstimator estimator,
                               const Eigen::Vector3d& anchor) {
  recover_scale(state, wand_length, estimator);
  const Eigen::Vector3d shift = marker_centroid(state) - anchor;
  for (auto& marker : state.markers) marker -= shift;
  for (auto& pose : state.poses) {
    pose.t_prime += rotation_from_euler(pose.angles) * shift;
  }
}

// Intersects the structural variable boxes with incumbent ± radius. The
// incumbent itself always stays inside the box — even a coordinate the
// canonicalization nudged past the static bounds — so the subproblem can
// never lose feasibility to the trust region. Tightening is monotone in
// the radius, so re-tightening the same problem with a smaller one is safe.
inline void apply_trust_region(lp::LpProblem& problem,
                               const lp::SubproblemLayout& layout,
                               const SceneState& incumbent, double radius) {
  auto tighten = [&](int col, double v) {
    problem.lower[col] = std::min(std::max(problem.lower[col], v - radius), v);
    problem.upper[col] = std::max(std::min(problem.upper[col], v + radius), v);
  };
  for (int m = 0; m < layout.num_markers; ++m) {
    for (int k = 0; k < 3; ++k) {
      tighten(layout.marker_col(m, k), incumbent.markers[m][k]);
    }
  }
  for (int n = 0; n < layout.num_cameras; ++n) {
    for (int k = 0; k < 3; ++k) {
      tighten(layout.translation_col(n, k), incumbent.poses[n].t_prime[k]);
    }
  }
}

// Stage (a): replace every camera's angles by its LM minimizer. Cameras
// are independent, so the optional threading changes wall time only.
inline void solve_all_angles(SceneState& state,
                             const NormalizedObservations& obs_norm,
                             const RefineConfig& cfg) {
  const int n_cams = static_cast<int>(state.poses.size());
  if (!cfg.parallel_angles || n_cams < 2) {
    for (int n = 0; n < n_cams; ++n) {
      state.poses[n].angles =
          solve_angles(n, state.poses[n], state.markers, obs_norm, cfg.lm)
              .first;
    }
    return;
  }
  std::vector<EulerAngles> solved(state.poses.size());
  std::vector<std::exception_ptr> errors(state.poses.size());
  std::vector<std::thread> workers;
  workers.reserve(state.poses.size());
  for (int n = 0; n < n_cams; ++n) {
    workers.emplace_back([&, n] {
      try {
        solved[n] =
            solve_angles(n, state.poses[n], state.markers, obs_norm, cfg.lm)
                .first;
      } catch (...) {
        errors[n] = std::current_exception();
      }
    });
  }
  for (auto& worker : workers) worker.join();
  for (const auto& error : errors) {
    if (error) std::rethrow_exception(error);
  }
  for (int n = 0; n < n_cams; ++n) state.poses[n].angles = solved[n];
}

}  // namespace detail

// Runs the alternation from `init` until E stalls, diverges, or the
// iteration cap is reached, then rescales the result so the mean wand
// length equals the protocol length.
inline RefineResult refine(const SceneState& init, const ObservationSet& obs,
                           const std::vector<CameraIntrinsics>& intrinsics,
                           const RefineConfig& cfg = {}) {
  cfg.validate();
  obs.validate();
  if (static_cast<int>(init.num_cameras()) != obs.num_cameras ||
      static_cast<int>(init.num_markers()) != obs.num_markers) {
    throw InvalidArgumentError("refine: initial state does not match data");
  }
  const double bound = cfg.subproblem.bound;
  for (const auto& pose : init.poses) {
    if (pose.t_prime.cwiseAbs().maxCoeff() > bound) {
      throw InvalidArgumentError("refine: initial translation out of bounds");
    }
  }
  for (const auto& marker : init.markers) {
    if (marker.cwiseAbs().maxCoeff() > bound) {
      throw InvalidArgumentError("refine: initial marker out of bounds");
    }
  }

  const NormalizedObservations obs_norm =
      normalize_observations(obs, intrinsics);

  RefineResult out;
  out.state = init;
  // Canonicalize the gauge up front so every E comparison, including the
  // first, happens in the same frame. The anchor is the initial centroid,
  // so the recentering below starts as a no-op.
  recover_scale(out.state, obs.wand_length, cfg.scale_estimator);
  const Eigen::Vector3d anchor = detail::marker_centroid(out.state);
  RefineReport& report = out.report;
  report.initial_e = eval_E(out.state.poses, out.state.markers, obs_norm);
  report.final_e = report.initial_e;
  report.stop = RefineStop::IterationLimit;

  // Accept slack for E comparisons at machine-precision floors; well under
  // the 1e-9 non-increase tolerance the report guarantees.
  const double accept_slack = 1e-12;
  const double radius_floor = 1e-6;
  double e_prev = report.initial_e;
  double radius = cfg.trust_radius;
  std::vector<lp::VarStatus> warm_basis;

  for (int iter = 1; iter <= cfg.max_iterations; ++iter) {
    RefineIteration row;
    row.iteration = iter;

    const auto t_angles = std::chrono::steady_clock::now();
    detail::solve_all_angles(out.state, obs_norm, cfg);
    row.ms_angles = detail::elapsed_ms(t_angles);
    const double e_after_angles =
        eval_E(out.state.poses, out.state.markers, obs_norm);

    auto t_lp = std::chrono::steady_clock::now();
    const lp::FixedAngleContext ctx =
        lp::make_fixed_angle_context(out.state.poses);
    auto [problem, layout] = lp::build_lp(obs_norm, ctx, cfg.subproblem);
    lp::add_anti_collapse(problem, layout, ctx, out.state.poses, obs_norm,
                          cfg.subproblem);

    bool accepted = false;
    double e_now = e_after_angles;
    double e_rejected = e_after_angles;
    while (true) {
      detail::apply_trust_region(problem, layout, out.state, radius);
      if (warm_basis.size() !=
          static_cast<std::size_t>(problem.num_vars() + problem.num_rows())) {
        warm_basis = lp::initial_basis_hint(problem, layout);
      }
      const lp::LpSolution sol = lp::solve_lp(problem, cfg.lp, &warm_basis);
      if (sol.status != lp::LpStatus::Optimal) {
        report.stop = RefineStop::LpFailure;
        report.message = "LP " + std::string(lp::to_string(sol.status)) +
                         " at iteration " + std::to_string(iter);
        break;
      }
      SceneState candidate = out.state;
      lp::extract_solution(sol, layout, candidate);
      detail::canonicalize_gauge(candidate, obs.wand_length,
                                 cfg.scale_estimator, anchor);
      row.ms_lp += detail::elapsed_ms(t_lp);
      // Lookahead: judge the step by E after the angles adapt to it.
      const auto t_look = std::chrono::steady_clock::now();
      detail::solve_all_angles(candidate, obs_norm, cfg);
      row.ms_angles += detail::elapsed_ms(t_look);
      t_lp = std::chrono::steady_clock::now();
      const double e_candidate =
          eval_E(candidate.poses, candidate.markers, obs_norm);
      if (e_candidate <= e_after_angles + accept_slack) {
        out.state = std::move(candidate);
        warm_basis = sol.basis;
        e_now = e_candidate;
        accepted = true;
        radius = std::min(radius * 2.0, cfg.trust_radius);
        break;
      }
      e_rejected = e_candidate;
      radius *= 0.25;
      if (radius < radius_floor) {
        report.stop = RefineStop::LaeLseDivergence;
        report.message = "LP step raised E from " +
                         std::to_string(e_after_angles) + " to " +
                         std::to_string(e_rejected) + " at iteration " +
                         std::to_string(iter) +
                         "; trust radius exhausted, rolled back";
        break;
      }
    }
    row.ms_lp += detail::elapsed_ms(t_lp);

    row.e = e_now;
    row.lae = eval_LAE(out.state.poses, out.state.markers, obs_norm);
    row.length_std = wand_length_stats(out.state.markers).stddev;
    try {
      row.p = eval_P(out.state.poses, intrinsics, out.state.markers, obs);
    } catch (const BehindCameraError&) {
      report.message += (report.message.empty() ? "" : "; ");
      report.message +=
          "P omitted at iteration " + std::to_string(iter) + " (behind camera)";
    }
    report.iterations.push_back(row);

    if (!accepted) break;  // LP failure or divergence rollback

    const double floor = 1e-300;
    if (e_prev <= floor || (e_prev - e_now) <= cfg.rel_tol * e_prev) {
      report.stop = RefineStop::Converged;
      break;
    }
    e_prev = e_now;
  }

  report.scale = recover_scale(out.state, obs.wand_length, cfg.scale_estimator);
  report.final_e = eval_E(out.state.poses, out.state.markers, obs_norm);
  return out;
}

}  // namespace wandcal
