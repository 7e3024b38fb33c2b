#pragma once

#include <Eigen/Core>
#include <Eigen/Dense>
#include <array>
#include <cmath>

#include "wandcal/core.hpp"

// Conventions used throughout:
//   - World and camera frames are right-handed; the camera looks along its
//     local +z axis.
//   - A camera rotation is parameterized by Euler angles composed as
//     R = Rz(phi_z) * Ry(phi_y) * Rx(phi_x), applied to column vectors.
//   - A world point x maps to camera coordinates as R * x + t', where t' is
//     the camera-frame translation. The camera center in world coordinates
//     is -R^T * t'.

namespace wandcal {

using WorldPoint = Eigen::Vector3d;
using PixelPoint = Eigen::Vector2d;

struct EulerAngles {
  double phi_x = 0.0;
  double phi_y = 0.0;
  double phi_z = 0.0;

  bool finite() const {
    return std::isfinite(phi_x) && std::isfinite(phi_y) && std::isfinite(phi_z);
  }

  /// Componentwise wrap into (-pi, pi].
  EulerAngles normalized() const {
    return {wrap_angle(phi_x), wrap_angle(phi_y), wrap_angle(phi_z)};
  }
};

struct CameraIntrinsics {
  double f = 1.0;      // focal length, pixels
  double alpha = 0.0;  // principal point u, pixels
  double beta = 0.0;   // principal point v, pixels
  double gamma = 1.0;  // aspect ratio

  void validate() const {
    if (!(std::isfinite(f) && std::isfinite(alpha) && std::isfinite(beta) &&
          std::isfinite(gamma))) {
      throw InvalidArgumentError("intrinsics must be finite");
    }
    if (f <= 0.0) throw InvalidArgumentError("focal length must be positive");
    if (gamma <= 0.0) throw InvalidArgumentError("aspect ratio must be positive");
  }
};

struct CameraPose {
  EulerAngles angles;
  Eigen::Vector3d t_prime = Eigen::Vector3d::Zero();
};

/// True when R is orthonormal with determinant +1 within tol.
inline bool is_rotation(const Eigen::Matrix3d& R, double tol = 1e-12) {
  const double ortho = (R.transpose() * R - Eigen::Matrix3d::Identity())
                           .cwiseAbs()
                           .maxCoeff();
  return ortho <= tol && std::abs(R.determinant() - 1.0) <= tol;
}

/// R = Rz * Ry * Rx, expanded in closed form.
inline Eigen::Matrix3d rotation_from_euler(const EulerAngles& a) {
  if (!a.finite()) throw InvalidArgumentError("euler angles must be finite");
  const double cx = std::cos(a.phi_x), sx = std::sin(a.phi_x);
  const double cy = std::cos(a.phi_y), sy = std::sin(a.phi_y);
  const double cz = std::cos(a.phi_z), sz = std::sin(a.phi_z);
  Eigen::Matrix3d r;
  r << cz * cy, cz * sy * sx - sz * cx, cz * sy * cx + sz * sx,
       sz * cy, sz * sy * sx + cz * cx, sz * sy * cx - cz * sx,
       -sy,     cy * sx,                cy * cx;
  return r;
}

/// Inverse of rotation_from_euler. Near the gimbal singularity
/// (|cos phi_y| ~ 0) phi_x is pinned to zero.
inline EulerAngles euler_from_rotation(const Eigen::Matrix3d& r) {
  EulerAngles a;
  const double sy = -r(2, 0);
  a.phi_y = std::asin(std::clamp(sy, -1.0, 1.0));
  if (std::abs(std::cos(a.phi_y)) > 1e-10) {
    a.phi_x = std::atan2(r(2, 1), r(2, 2));
    a.phi_z = std::atan2(r(1, 0), r(0, 0));
  } else {
    a.phi_x = 0.0;
    a.phi_z = std::atan2(-r(0, 1), r(1, 1));
  }
  return a;
}

/// Geodesic angle of a rotation matrix, radians in [0, pi]. Built from both
/// the trace (cosine) and the skew part (sine): for a rotation by theta,
/// ||R - R^T||_F = 2 sqrt(2) |sin theta|, so atan2 of the pair stays accurate
/// at both ends where acos((trace-1)/2) alone loses half the digits.
inline double rotation_angle(const Eigen::Matrix3d& r) {
  const double sine = (r - r.transpose()).norm() / (2.0 * std::sqrt(2.0));
  const double cosine = 0.5 * (r.trace() - 1.0);
  return std::atan2(sine, cosine);
}

/// Derivatives of R with respect to each Euler angle, in (x, y, z) order.
inline std::array<Eigen::Matrix3d, 3> rotation_derivatives(const EulerAngles& a) {
  const double cx = std::cos(a.phi_x), sx = std::sin(a.phi_x);
  const double cy = std::cos(a.phi_y), sy = std::sin(a.phi_y);
  const double cz = std::cos(a.phi_z), sz = std::sin(a.phi_z);

  Eigen::Matrix3d rx, ry, rz, drx, dry, drz;
  rx << 1, 0, 0, 0, cx, -sx, 0, sx, cx;
  ry << cy, 0, sy, 0, 1, 0, -sy, 0, cy;
  rz << cz, -sz, 0, sz, cz, 0, 0, 0, 1;
  drx << 0, 0, 0, 0, -sx, -cx, 0, cx, -sx;
  dry << -sy, 0, cy, 0, 0, 0, -cy, 0, -sy;
  drz << -sz, -cz, 0, cz, -sz, 0, 0, 0, 0;

  return {rz * ry * drx, rz * dry * rx, drz * ry * rx};
}

/// Signed depth of x in the camera frame: r3 . x + t'_z.
inline double projection_depth(const WorldPoint& x, const Eigen::Matrix3d& r,
                               const Eigen::Vector3d& t_prime) {
  return r.row(2).dot(x) + t_prime.z();
}

inline PixelPoint project(const WorldPoint& x, const Eigen::Matrix3d& r,
                          const Eigen::Vector3d& t_prime,
                          const CameraIntrinsics& k) {
  const double depth = projection_depth(x, r, t_prime);
  if (!(depth > 0.0)) throw BehindCameraError(depth);
  const double u =
      k.alpha + k.gamma * k.f * (r.row(0).dot(x) + t_prime.x()) / depth;
  const double v = k.beta + k.f * (r.row(1).dot(x) + t_prime.y()) / depth;
  return {u, v};
}

inline PixelPoint project(const WorldPoint& x, const CameraPose& pose,
                          const CameraIntrinsics& k) {
  return project(x, rotation_from_euler(pose.angles), pose.t_prime, k);
}

/// Maps a measured pixel to normalized coordinates: ((u-alpha)/(gamma f),
/// (v-beta)/f). The aspect ratio divides the u component so that a perfect
/// observation yields exactly zero non-fractional residual.
inline PixelPoint normalize_fp(const PixelPoint& fp, const CameraIntrinsics& k) {
  k.validate();
  return {(fp.x() - k.alpha) / (k.gamma * k.f), (fp.y() - k.beta) / k.f};
}

inline WorldPoint camera_center(const Eigen::Matrix3d& r,
                                const Eigen::Vector3d& t_prime) {
  return -r.transpose() * t_prime;
}

/// Rotation for a camera at `position` whose optical axis points at `target`.
/// Rows of the result are the camera axes expressed in world coordinates.
inline Eigen::Matrix3d look_at_rotation(
    const WorldPoint& position, const WorldPoint& target,
    const Eigen::Vector3d& up = Eigen::Vector3d(0, 0, 1)) {
  const Eigen::Vector3d forward = target - position;
  if (forward.norm() < 1e-12) {
    throw DegenerateGeometryError("look-at target coincides with camera");
  }
  const Eigen::Vector3d z = forward.normalized();
  Eigen::Vector3d x = z.cross(up);
  if (x.norm() < 1e-9) {
    throw DegenerateGeometryError("look-at direction is parallel to up");
  }
  x.normalize();
  const Eigen::Vector3d y = z.cross(x);
  Eigen::Matrix3d r;
  r.row(0) = x;
  r.row(1) = y;
  r.row(2) = z;
  return r;
}

inline WorldPoint camera_center(const CameraPose& pose) {
  return camera_center(rotation_from_euler(pose.angles), pose.t_prime);
}

}  // namespace wandcal
