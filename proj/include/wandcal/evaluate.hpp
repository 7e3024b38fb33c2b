#pragma once

// Truth-referenced quality metrics. An estimate is first carried into the
// reference gauge with gauge_align; the residual per-camera center and
// rotation errors, marker RMS, and wand-length spread then measure real
// estimation error rather than gauge freedom. Reprojection RMS compares
// pixel projections of the aligned estimate against projections of the
// truth through the truth intrinsics, over every pair both states can see.

#include <cmath>
#include <limits>
#include <vector>

#include "wandcal/gauge.hpp"
#include "wandcal/geometry.hpp"
#include "wandcal/residuals.hpp"
#include "wandcal/state.hpp"

namespace wandcal {

struct EvalMetrics {
  std::vector<double> center_errors;    // per camera, meters
  std::vector<double> rotation_errors;  // per camera, radians
  double marker_rms = 0.0;              // meters
  double reprojection_rms = 0.0;        // pixels; NaN if nothing projected
  double length_std = 0.0;              // meters, population std over frames
  int reprojected_pairs = 0;            // pairs entering the RMS
  int behind_pairs = 0;                 // truth-visible pairs the estimate
                                        // places behind the camera

  double max_center_error() const {
    double out = 0.0;
    for (double e : center_errors) out = std::max(out, e);
    return out;
  }
  double max_rotation_error() const {
    double out = 0.0;
    for (double e : rotation_errors) out = std::max(out, e);
    return out;
  }
};

/// Aligns `estimate` onto `truth` and reports the residual errors.
/// `intrinsics` are the truth cameras' (one per camera); they only enter the
/// reprojection metric.
inline EvalMetrics evaluate_state(const SceneState& estimate,
                                  const SceneState& truth,
                                  const std::vector<CameraIntrinsics>& intrinsics) {
  if (static_cast<int>(intrinsics.size()) != truth.num_cameras()) {
    throw InvalidArgumentError(
        "evaluate_state: intrinsics count does not match camera count");
  }
  const SceneState aligned = gauge_align(estimate, truth).aligned;

  EvalMetrics out;
  for (int n = 0; n < truth.num_cameras(); ++n) {
    out.center_errors.push_back(
        (camera_center(aligned.poses[n]) - camera_center(truth.poses[n]))
            .norm());
    const Eigen::Matrix3d delta = rotation_from_euler(aligned.poses[n].angles) *
                                  rotation_from_euler(truth.poses[n].angles)
                                      .transpose();
    out.rotation_errors.push_back(rotation_angle(delta));
  }

  CompensatedSum marker_sq;
  for (int m = 0; m < truth.num_markers(); ++m) {
    marker_sq.add((aligned.markers[m] - truth.markers[m]).squaredNorm());
  }
  out.marker_rms = std::sqrt(marker_sq.value() / truth.num_markers());

  // Pixel-space comparison through the truth intrinsics. Pairs the truth
  // itself cannot see are skipped; pairs the estimate pushes behind the
  // camera are counted separately instead of silently vanishing.
  CompensatedSum pixel_sq;
  for (int n = 0; n < truth.num_cameras(); ++n) {
    const Eigen::Matrix3d r_truth = rotation_from_euler(truth.poses[n].angles);
    const Eigen::Matrix3d r_est = rotation_from_euler(aligned.poses[n].angles);
    for (int m = 0; m < truth.num_markers(); ++m) {
      if (!(projection_depth(truth.markers[m], r_truth,
                             truth.poses[n].t_prime) > 0.0)) {
        continue;
      }
      if (!(projection_depth(aligned.markers[m], r_est,
                             aligned.poses[n].t_prime) > 0.0)) {
        ++out.behind_pairs;
        continue;
      }
      const PixelPoint expected = project(truth.markers[m], r_truth,
                                          truth.poses[n].t_prime,
                                          intrinsics[n]);
      const PixelPoint got = project(aligned.markers[m], r_est,
                                     aligned.poses[n].t_prime, intrinsics[n]);
      pixel_sq.add((got - expected).squaredNorm());
      ++out.reprojected_pairs;
    }
  }
  out.reprojection_rms =
      out.reprojected_pairs > 0
          ? std::sqrt(pixel_sq.value() / out.reprojected_pairs)
          : std::numeric_limits<double>::quiet_NaN();

  out.length_std = wand_length_stats(aligned.markers).stddev;
  return out;
}

/// RMS pixel error of a state against recorded observations: the root of
/// the mean squared 2D residual over visible pairs (the usual reprojection
/// RMS convention).
inline double reprojection_rms_px(const std::vector<CameraPose>& poses,
                                  const std::vector<CameraIntrinsics>& intrinsics,
                                  const std::vector<WorldPoint>& markers,
                                  const ObservationSet& obs) {
  const int pairs = obs.visible_pairs();
  if (pairs == 0) {
    throw InsufficientObservationsError("no visible observations");
  }
  return std::sqrt(eval_P(poses, intrinsics, markers, obs) /
                   static_cast<double>(pairs));
}

}  // namespace wandcal
