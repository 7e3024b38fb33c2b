#pragma once

// Gauge fixing for evaluation. A calibration is only determined up to a
// global similarity: rotating, translating, or scaling the world and
// transporting the extrinsics accordingly leaves every pixel untouched.
// Comparing an estimate against a reference therefore requires aligning
// them first. The alignment is the closed-form least-squares similarity
// (Umeyama) over the stacked camera centers and markers.

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <vector>

#include "wandcal/geometry.hpp"
#include "wandcal/state.hpp"

namespace wandcal {

struct SimilarityTransform {
  double scale = 1.0;
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  WorldPoint apply(const WorldPoint& x) const {
    return scale * (rotation * x) + translation;
  }
};

struct GaugeAlignment {
  SimilarityTransform transform;  // maps estimate coordinates to reference
  SceneState aligned;             // estimate expressed in reference coordinates
};

namespace detail {

// Camera centers followed by markers, as columns.
inline Eigen::Matrix3Xd alignment_points(const SceneState& state) {
  Eigen::Matrix3Xd pts(3, state.num_cameras() + state.num_markers());
  int col = 0;
  for (const auto& pose : state.poses) pts.col(col++) = camera_center(pose);
  for (const auto& marker : state.markers) pts.col(col++) = marker;
  return pts;
}

}  // namespace detail

// Transports a pose across a similarity of the world. Camera coordinates
// scale uniformly, which projection ratios cannot see, so the transported
// pose reprojects transported points to the original pixels.
inline CameraPose transport_pose(const CameraPose& pose,
                                 const SimilarityTransform& g) {
  const Eigen::Matrix3d r = rotation_from_euler(pose.angles);
  const Eigen::Matrix3d r_new = r * g.rotation.transpose();
  CameraPose out;
  out.angles = euler_from_rotation(r_new);
  // Rebuild from the reconstructed angles so the stored pair is exactly
  // self-consistent.
  out.t_prime = g.scale * pose.t_prime -
                rotation_from_euler(out.angles) * g.translation;
  return out;
}

// Best-fit similarity from the estimate's camera centers and markers onto
// the reference's, applied to the whole state.
inline GaugeAlignment gauge_align(const SceneState& estimate,
                                  const SceneState& reference) {
  if (estimate.num_cameras() != reference.num_cameras() ||
      estimate.num_markers() != reference.num_markers()) {
    throw InvalidArgumentError(
        "gauge_align: estimate and reference sizes differ");
  }
  const Eigen::Matrix3Xd src = detail::alignment_points(estimate);
  const Eigen::Matrix3Xd dst = detail::alignment_points(reference);
  if (src.cols() < 3) {
    throw DegenerateGeometryError("gauge_align: need at least 3 points");
  }

  // Collinear references leave a rotation about the common axis free.
  const Eigen::Vector3d dst_mean = dst.rowwise().mean();
  const Eigen::Matrix3Xd centered = dst.colwise() - dst_mean;
  const Eigen::JacobiSVD<Eigen::Matrix3Xd> svd(centered);
  if (svd.singularValues()(1) <=
      1e-9 * std::max(1.0, svd.singularValues()(0))) {
    throw DegenerateGeometryError("gauge_align: reference points collinear");
  }

  const Eigen::Matrix4d t = Eigen::umeyama(src, dst, true);
  GaugeAlignment out;
  const Eigen::Matrix3d linear = t.topLeftCorner<3, 3>();
  out.transform.scale = std::cbrt(linear.determinant());
  out.transform.rotation = linear / out.transform.scale;
  out.transform.translation = t.topRightCorner<3, 1>();

  out.aligned.markers.reserve(estimate.markers.size());
  for (const auto& marker : estimate.markers) {
    out.aligned.markers.push_back(out.transform.apply(marker));
  }
  out.aligned.poses.reserve(estimate.poses.size());
  for (const auto& pose : estimate.poses) {
    out.aligned.poses.push_back(transport_pose(pose, out.transform));
  }
  return out;
}

// Pose-error summary after alignment: worst camera-center distance (meters)
// and worst rotation angle difference (radians).
struct PoseErrors {
  double max_center_distance = 0.0;
  double max_rotation_angle = 0.0;
};

inline PoseErrors pose_errors(const SceneState& aligned,
                                    const SceneState& reference) {
  if (aligned.num_cameras() != reference.num_cameras()) {
    throw InvalidArgumentError("pose_errors: camera counts differ");
  }
  PoseErrors out;
  for (std::size_t n = 0; n < aligned.poses.size(); ++n) {
    out.max_center_distance = std::max(
        out.max_center_distance,
        (camera_center(aligned.poses[n]) - camera_center(reference.poses[n]))
            .norm());
    const Eigen::Matrix3d delta =
        rotation_from_euler(aligned.poses[n].angles) *
        rotation_from_euler(reference.poses[n].angles).transpose();
    out.max_rotation_angle =
        std::max(out.max_rotation_angle, rotation_angle(delta));
  }
  return out;
}

}  // namespace wandcal
