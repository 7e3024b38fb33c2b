#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "wandcal/core.hpp"
#include "wandcal/geometry.hpp"
#include "wandcal/observations.hpp"
#include "wandcal/state.hpp"

namespace wandcal {

/// Non-fractional residual pair for one (marker, camera):
///   U = (ubar r3 - r1) . x + ubar t'_z - t'_x
///   V = (vbar r3 - r2) . x + vbar t'_z - t'_y
/// Both vanish exactly when the normalized observation equals the ideal
/// projection; U equals depth times the normalized reprojection error, so the
/// forms are linear in (x, t') at fixed angles.
struct ResidualPair {
  double u = 0.0;
  double v = 0.0;
};

inline ResidualPair residual_uv(const WorldPoint& x, const Eigen::Matrix3d& r,
                                const Eigen::Vector3d& t_prime,
                                const PixelPoint& fp_norm) {
  const double ubar = fp_norm.x();
  const double vbar = fp_norm.y();
  const double r3x = r.row(2).dot(x);
  ResidualPair out;
  out.u = ubar * r3x - r.row(0).dot(x) + ubar * t_prime.z() - t_prime.x();
  out.v = vbar * r3x - r.row(1).dot(x) + vbar * t_prime.z() - t_prime.y();
  return out;
}

inline ResidualPair residual_uv(const WorldPoint& x, const CameraPose& pose,
                                const PixelPoint& fp_norm) {
  return residual_uv(x, rotation_from_euler(pose.angles), pose.t_prime, fp_norm);
}

inline std::vector<Eigen::Matrix3d> rotations_of(
    const std::vector<CameraPose>& poses) {
  std::vector<Eigen::Matrix3d> rs;
  rs.reserve(poses.size());
  for (const auto& pose : poses) rs.push_back(rotation_from_euler(pose.angles));
  return rs;
}

/// Fractional reprojection error P (sum of squared pixel residuals). Throws
/// behind-camera with the offending (m, n) when an observed marker has
/// nonpositive depth. Accumulated in (m, n) order with compensated summation.
inline double eval_P(const std::vector<CameraPose>& poses,
                     const std::vector<CameraIntrinsics>& intrinsics,
                     const std::vector<WorldPoint>& markers,
                     const ObservationSet& obs) {
  const std::vector<Eigen::Matrix3d> rs = rotations_of(poses);
  CompensatedSum total;
  for (int m = 0; m < obs.num_markers; ++m) {
    for (int n = 0; n < obs.num_cameras; ++n) {
      if (!obs.visible(m, n)) continue;
      const double depth =
          projection_depth(markers[m], rs[n], poses[n].t_prime);
      if (!(depth > 0.0)) throw BehindCameraError(depth, m, n);
      const PixelPoint predicted =
          project(markers[m], rs[n], poses[n].t_prime, intrinsics[n]);
      total.add((predicted - obs.fp(m, n)).squaredNorm());
    }
  }
  return total.value();
}

/// Per-coordinate RMS reprojection error in pixels: sqrt(P / (2 * #pairs)).
inline double reprojection_rms(const std::vector<CameraPose>& poses,
                               const std::vector<CameraIntrinsics>& intrinsics,
                               const std::vector<WorldPoint>& markers,
                               const ObservationSet& obs) {
  const int pairs = obs.visible_pairs();
  if (pairs == 0) return 0.0;
  return std::sqrt(eval_P(poses, intrinsics, markers, obs) / (2.0 * pairs));
}

/// Non-fractional LSE objective E = sum of U^2 + V^2 over visible pairs.
inline double eval_E(const std::vector<CameraPose>& poses,
                     const std::vector<WorldPoint>& markers,
                     const NormalizedObservations& obs_norm) {
  const std::vector<Eigen::Matrix3d> rs = rotations_of(poses);
  CompensatedSum total;
  for (int m = 0; m < obs_norm.num_markers; ++m) {
    for (int n = 0; n < obs_norm.num_cameras; ++n) {
      if (!obs_norm.visible(m, n)) continue;
      const ResidualPair rp =
          residual_uv(markers[m], rs[n], poses[n].t_prime, obs_norm.fp(m, n));
      total.add(rp.u * rp.u + rp.v * rp.v);
    }
  }
  return total.value();
}

/// Least-absolute-error objective: sum of |U| + |V| over visible pairs.
inline double eval_LAE(const std::vector<CameraPose>& poses,
                       const std::vector<WorldPoint>& markers,
                       const NormalizedObservations& obs_norm) {
  const std::vector<Eigen::Matrix3d> rs = rotations_of(poses);
  CompensatedSum total;
  for (int m = 0; m < obs_norm.num_markers; ++m) {
    for (int n = 0; n < obs_norm.num_cameras; ++n) {
      if (!obs_norm.visible(m, n)) continue;
      const ResidualPair rp =
          residual_uv(markers[m], rs[n], poses[n].t_prime, obs_norm.fp(m, n));
      total.add(std::abs(rp.u) + std::abs(rp.v));
    }
  }
  return total.value();
}

/// Per-camera slice of E (the E_phi_n sub-objective): only pairs observed by
/// camera n contribute.
inline double eval_E_camera(int n, const CameraPose& pose,
                            const std::vector<WorldPoint>& markers,
                            const NormalizedObservations& obs_norm) {
  const Eigen::Matrix3d r = rotation_from_euler(pose.angles);
  CompensatedSum total;
  for (int m = 0; m < obs_norm.num_markers; ++m) {
    if (!obs_norm.visible(m, n)) continue;
    const ResidualPair rp =
        residual_uv(markers[m], r, pose.t_prime, obs_norm.fp(m, n));
    total.add(rp.u * rp.u + rp.v * rp.v);
  }
  return total.value();
}

struct WandLengthStats {
  double mean = 0.0;
  double stddev = 0.0;               // population standard deviation
  std::vector<double> lengths;        // one per frame
};

inline WandLengthStats wand_length_stats(const std::vector<WorldPoint>& markers) {
  if (markers.size() % 2 != 0) {
    throw InvalidArgumentError("marker count must be even (wand pairs)");
  }
  if (markers.empty()) {
    throw InvalidArgumentError("no markers");
  }
  WandLengthStats stats;
  const std::size_t frames = markers.size() / 2;
  stats.lengths.reserve(frames);
  CompensatedSum mean_sum;
  for (std::size_t i = 0; i < frames; ++i) {
    const double len = (markers[2 * i + 1] - markers[2 * i]).norm();
    stats.lengths.push_back(len);
    mean_sum.add(len);
  }
  stats.mean = mean_sum.value() / static_cast<double>(frames);
  CompensatedSum var_sum;
  for (const double len : stats.lengths) {
    const double dev = len - stats.mean;
    var_sum.add(dev * dev);
  }
  stats.stddev = std::sqrt(var_sum.value() / static_cast<double>(frames));
  return stats;
}

enum class ScaleEstimator { Mean, Median };

/// Rescales the whole state so that the estimated wand length matches d.
/// Both markers and translations are multiplied by s = d / d_m: the U, V
/// residuals are jointly homogeneous in (x, t'), so scaling X alone would
/// change every reprojection. Returns the applied scale factor.
inline double recover_scale(SceneState& state, double d,
                            ScaleEstimator estimator = ScaleEstimator::Mean) {
  if (!(d > 0.0)) throw InvalidArgumentError("wand length must be positive");
  WandLengthStats stats = wand_length_stats(state.markers);
  double d_m = stats.mean;
  if (estimator == ScaleEstimator::Median) {
    std::vector<double> sorted = stats.lengths;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t half = sorted.size() / 2;
    d_m = sorted.size() % 2 == 1
              ? sorted[half]
              : 0.5 * (sorted[half - 1] + sorted[half]);
  }
  if (!(d_m > 0.0)) {
    throw DegenerateGeometryError("estimated wand length is zero");
  }
  const double s = d / d_m;
  for (auto& marker : state.markers) marker *= s;
  for (auto& pose : state.poses) pose.t_prime *= s;
  return s;
}

}  // namespace wandcal
