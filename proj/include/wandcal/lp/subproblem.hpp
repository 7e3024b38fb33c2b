#pragma once

#include <Eigen/Core>
#include <cmath>
#include <string>
#include <vector>

#include "wandcal/core.hpp"
#include "wandcal/geometry.hpp"
#include "wandcal/observations.hpp"
#include "wandcal/lp/problem.hpp"
#include "wandcal/state.hpp"

namespace wandcal::lp {

/// Per-camera rotations frozen for one alternation step; the LP sees only
/// these rows, never the angles.
struct FixedAngleContext {
  std::vector<Eigen::Matrix3d> rotations;
};

inline FixedAngleContext make_fixed_angle_context(
    const std::vector<CameraPose>& poses) {
  FixedAngleContext ctx;
  ctx.rotations.reserve(poses.size());
  for (const auto& pose : poses) {
    ctx.rotations.push_back(rotation_from_euler(pose.angles));
  }
  return ctx;
}

/// How the "object below all cameras" rows express the camera height.
///   FrozenCenter:      z_m <= (center z from the incoming t' estimates),
///                      a constant at this iteration.
///   LinearTranslation: z_m - (center z as a linear form in t') <= -margin,
///                      which keeps the row exact as t' moves and excludes
///                      the collapse family outright.
enum class AntiCollapseMode { FrozenCenter, LinearTranslation };

struct SubproblemConfig {
  double bound = 10.0;       // B_u = -B_l, meters
  int m_cal = 200;           // leading markers constrained below the cameras
  AntiCollapseMode anti_collapse = AntiCollapseMode::LinearTranslation;
  double margin = 0.05;      // clearance (meters) for LinearTranslation rows
};

struct SubproblemLayout {
  int num_markers = 0;
  int num_cameras = 0;
  std::vector<int> aux_base;  // index(m, n) -> first of 2 aux columns, or -1
  int marker_base = 0;        // marker m occupies marker_base + 3m ..+2
  int translation_base = 0;   // camera n occupies translation_base + 3n ..+2
  double bound = 0.0;
  double aux_cap = 0.0;
  int num_abs_rows = 0;

  int marker_col(int m, int axis) const { return marker_base + 3 * m + axis; }
  int translation_col(int n, int axis) const {
    return translation_base + 3 * n + axis;
  }
  int aux_col(int m, int n) const { return aux_base[index(m, n)]; }
  std::size_t index(int m, int n) const {
    return static_cast<std::size_t>(m) * num_cameras + n;
  }
};

/// Assembles the fixed-angle LAE minimization as an LP: for every visible
/// pair, two auxiliary columns u, v and the four rows
///     U - u <= 0,   -U - u <= 0,   V - v <= 0,   -V - v <= 0,
/// with U, V the affine residual forms in the marker and translation columns.
/// Masked-out pairs contribute neither columns nor rows. Anti-collapse rows
/// are appended separately by add_anti_collapse.
inline std::pair<LpProblem, SubproblemLayout> build_lp(
    const NormalizedObservations& obs_norm, const FixedAngleContext& ctx,
    const SubproblemConfig& cfg = {}) {
  const int num_markers = obs_norm.num_markers;
  const int num_cameras = obs_norm.num_cameras;
  if (static_cast<int>(ctx.rotations.size()) != num_cameras) {
    throw InvalidArgumentError("context has wrong camera count");
  }
  for (int n = 0; n < num_cameras; ++n) {
    if (obs_norm.camera_visibility(n) == 0) {
      throw DegenerateGeometryError("camera " + std::to_string(n) +
                                    " observes no markers");
    }
  }

  // First pass: the largest row coefficient fixes the auxiliary cap.
  double max_coef = 1.0;  // the -1 on every auxiliary column
  for (int m = 0; m < num_markers; ++m) {
    for (int n = 0; n < num_cameras; ++n) {
      if (!obs_norm.visible(m, n)) continue;
      const PixelPoint fp = obs_norm.fp(m, n);
      const Eigen::Matrix3d& r = ctx.rotations[n];
      const Eigen::Vector3d cu = (fp.x() * r.row(2) - r.row(0)).transpose();
      const Eigen::Vector3d cv = (fp.y() * r.row(2) - r.row(1)).transpose();
      max_coef = std::max({max_coef, cu.cwiseAbs().maxCoeff(),
                           cv.cwiseAbs().maxCoeff(), std::abs(fp.x()),
                           std::abs(fp.y())});
    }
  }

  LpProblem p;
  SubproblemLayout layout;
  layout.num_markers = num_markers;
  layout.num_cameras = num_cameras;
  layout.bound = cfg.bound;
  layout.aux_cap = 4.0 * cfg.bound * max_coef;
  layout.aux_base.assign(static_cast<std::size_t>(num_markers) * num_cameras, -1);

  for (int m = 0; m < num_markers; ++m) {
    for (int n = 0; n < num_cameras; ++n) {
      if (!obs_norm.visible(m, n)) continue;
      layout.aux_base[layout.index(m, n)] =
          p.add_variable(0.0, layout.aux_cap, 1.0);
      p.add_variable(0.0, layout.aux_cap, 1.0);
    }
  }
  layout.marker_base = p.num_vars();
  for (int m = 0; m < 3 * num_markers; ++m) {
    p.add_variable(-cfg.bound, cfg.bound, 0.0);
  }
  layout.translation_base = p.num_vars();
  for (int n = 0; n < 3 * num_cameras; ++n) {
    p.add_variable(-cfg.bound, cfg.bound, 0.0);
  }

  for (int m = 0; m < num_markers; ++m) {
    for (int n = 0; n < num_cameras; ++n) {
      if (!obs_norm.visible(m, n)) continue;
      const PixelPoint fp = obs_norm.fp(m, n);
      const Eigen::Matrix3d& r = ctx.rotations[n];
      const Eigen::Vector3d cu = (fp.x() * r.row(2) - r.row(0)).transpose();
      const Eigen::Vector3d cv = (fp.y() * r.row(2) - r.row(1)).transpose();
      const int aux_u = layout.aux_col(m, n);
      const int aux_v = aux_u + 1;

      // U = cu . x_m - t'_x + ubar t'_z ; V = cv . x_m - t'_y + vbar t'_z.
      for (const double sign : {1.0, -1.0}) {
        p.add_row({{layout.marker_col(m, 0), sign * cu.x()},
                   {layout.marker_col(m, 1), sign * cu.y()},
                   {layout.marker_col(m, 2), sign * cu.z()},
                   {layout.translation_col(n, 0), -sign},
                   {layout.translation_col(n, 2), sign * fp.x()},
                   {aux_u, -1.0}},
                  0.0);
        p.add_row({{layout.marker_col(m, 0), sign * cv.x()},
                   {layout.marker_col(m, 1), sign * cv.y()},
                   {layout.marker_col(m, 2), sign * cv.z()},
                   {layout.translation_col(n, 1), -sign},
                   {layout.translation_col(n, 2), sign * fp.y()},
                   {aux_v, -1.0}},
                  0.0);
      }
    }
  }
  layout.num_abs_rows = p.num_rows();
  return {std::move(p), layout};
}

/// Appends the "wand starts below all cameras" rows for the first
/// min(m_cal, M) markers against every camera that observes them. The frozen
/// form transcribes the incoming camera-center heights as constants; the
/// linear form writes the center height as a row over the translation
/// columns, with a strict clearance margin.
inline void add_anti_collapse(LpProblem& p, const SubproblemLayout& layout,
                              const FixedAngleContext& ctx,
                              const std::vector<CameraPose>& poses,
                              const NormalizedObservations& obs_norm,
                              const SubproblemConfig& cfg) {
  const int constrained = std::min(cfg.m_cal, layout.num_markers);
  for (int m = 0; m < constrained; ++m) {
    for (int n = 0; n < layout.num_cameras; ++n) {
      if (!obs_norm.visible(m, n)) continue;
      if (cfg.anti_collapse == AntiCollapseMode::FrozenCenter) {
        const double center_z =
            camera_center(ctx.rotations[n], poses[n].t_prime).z();
        p.add_row({{layout.marker_col(m, 2), 1.0}}, center_z);
      } else {
        // z_m - center_z(t') <= -margin, center_z = -(R^T t')_z.
        const Eigen::Matrix3d& r = ctx.rotations[n];
        p.add_row({{layout.marker_col(m, 2), 1.0},
                   {layout.translation_col(n, 0), r(0, 2)},
                   {layout.translation_col(n, 1), r(1, 2)},
                   {layout.translation_col(n, 2), r(2, 2)}},
                  -cfg.margin);
      }
    }
  }
}

/// Maps an optimal LP point back to markers and translations. Throws when
/// the solve did not reach optimality, and when an auxiliary column sits at
/// its safety cap (the cap is designed to never bind at a genuine optimum).
inline void extract_solution(const LpSolution& sol,
                             const SubproblemLayout& layout, SceneState& state) {
  if (sol.status != LpStatus::Optimal) {
    throw NumericError(std::string("translation/marker LP did not solve: ") +
                       to_string(sol.status));
  }
  const double cap_guard = layout.aux_cap - 1e-6 * std::max(1.0, layout.aux_cap);
  for (int m = 0; m < layout.num_markers; ++m) {
    for (int n = 0; n < layout.num_cameras; ++n) {
      const int aux = layout.aux_col(m, n);
      if (aux < 0) continue;
      if (sol.x[aux] > cap_guard || sol.x[aux + 1] > cap_guard) {
        throw NumericError("auxiliary variable pinned at its cap");
      }
    }
  }
  state.markers.resize(layout.num_markers);
  for (int m = 0; m < layout.num_markers; ++m) {
    state.markers[m] = WorldPoint(sol.x[layout.marker_col(m, 0)],
                                  sol.x[layout.marker_col(m, 1)],
                                  sol.x[layout.marker_col(m, 2)]);
  }
  if (static_cast<int>(state.poses.size()) != layout.num_cameras) {
    throw InvalidArgumentError("state has wrong camera count");
  }
  for (int n = 0; n < layout.num_cameras; ++n) {
    state.poses[n].t_prime =
        Eigen::Vector3d(sol.x[layout.translation_col(n, 0)],
                        sol.x[layout.translation_col(n, 1)],
                        sol.x[layout.translation_col(n, 2)]);
  }
}

/// Warm-start hint for the first solve of a freshly assembled subproblem:
/// auxiliaries at their cap (which satisfies every absolute-value row at any
/// structural point), structurals at a bound, slacks basic.
inline std::vector<VarStatus> initial_basis_hint(const LpProblem& p,
                                                 const SubproblemLayout& layout) {
  std::vector<VarStatus> hint(p.num_vars() + p.num_rows(), VarStatus::AtLower);
  for (int j = 0; j < p.num_vars(); ++j) {
    if (j < layout.marker_base) hint[j] = VarStatus::AtUpper;  // aux at cap
  }
  for (int i = 0; i < p.num_rows(); ++i) {
    hint[p.num_vars() + i] = VarStatus::Basic;
  }
  return hint;
}

}  // namespace wandcal::lp
