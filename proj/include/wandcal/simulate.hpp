#pragma once

// Synthetic rig and wand-trajectory generator. Cameras are ringed around
// the working volume looking inward from above; the wand midpoint follows a
// smooth random walk whose first frames are confined to a low box beneath
// every camera, matching the imaging protocol the anti-collapse rows rely
// on. Observations are exact projections plus optional Gaussian pixel noise,
// masked by a frustum test and optional random dropout.
//
// All randomness flows through one generator in a fixed draw order: rig and
// trajectory first, dropout second, noise last. Scenes generated from the
// same seed therefore share bit-identical ground truth regardless of the
// dropout and noise settings.

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "wandcal/geometry.hpp"
#include "wandcal/observations.hpp"
#include "wandcal/state.hpp"

namespace wandcal {

struct SceneSpec {
  int num_cameras = 4;
  int num_frames = 150;  // M' wand placements; M = 2 * M' markers

  // Rig placement: a jittered ring, all cameras looking at `look_at`.
  double ring_radius = 3.0;
  double camera_height_min = 2.0;
  double camera_height_max = 2.8;
  WorldPoint look_at = WorldPoint(0.0, 0.0, 1.0);

  // Intrinsics ranges (pixels), principal point near the image center.
  int image_width = 1920;
  int image_height = 1080;
  double focal_min = 900.0;
  double focal_max = 1100.0;
  double principal_jitter = 20.0;
  double gamma_min = 0.98;
  double gamma_max = 1.02;

  // Trajectory: low-start random walk. The first ceil(m_cal / 2) frames are
  // confined below `low_zone_ceiling`, which must sit strictly under every
  // camera so the height constraints are consistent with truth.
  double wand_length = 0.5;
  int m_cal = 200;
  double low_zone_ceiling = 1.5;
  double walk_extent = 1.2;  // half-width of the walk box in x and y

  // Observation model.
  double pixel_noise = 0.0;   // sigma, pixels
  double dropout = 0.0;       // per-observation removal probability
  double min_depth = 0.2;     // meters; closer points count as invisible

  std::uint64_t seed = 0;

  void validate() const {
    if (num_cameras < 2) {
      throw InvalidArgumentError("SceneSpec: need at least 2 cameras");
    }
    if (num_frames < 2) {
      throw InvalidArgumentError("SceneSpec: need at least 2 wand frames");
    }
    if (!(wand_length > 0.0)) {
      throw InvalidArgumentError("SceneSpec: wand length must be positive");
    }
    if (!(camera_height_min > low_zone_ceiling)) {
      throw InvalidArgumentError(
          "SceneSpec: cameras must sit strictly above the low-start zone");
    }
    if (camera_height_max < camera_height_min || focal_max < focal_min ||
        gamma_max < gamma_min) {
      throw InvalidArgumentError("SceneSpec: empty parameter range");
    }
    if (!(ring_radius > 0.0) || image_width <= 0 || image_height <= 0) {
      throw InvalidArgumentError("SceneSpec: invalid rig dimensions");
    }
    if (!(pixel_noise >= 0.0) || !(dropout >= 0.0) || dropout >= 1.0 ||
        m_cal < 0) {
      throw InvalidArgumentError("SceneSpec: invalid observation model");
    }
    // The low box must leave headroom for a whole wand frame.
    if (!(low_zone_ceiling > wand_length + 0.1)) {
      throw InvalidArgumentError(
          "SceneSpec: low-start zone too shallow for the wand");
    }
  }
};

struct GroundTruth {
  std::vector<CameraPose> poses;
  std::vector<CameraIntrinsics> intrinsics;
  std::vector<WorldPoint> markers;

  SceneState state() const { return SceneState{poses, markers}; }
};

namespace detail {

// Frustum test against camera n: positive depth and pixel coordinates
// inside the image rectangle.
inline bool in_frustum(const WorldPoint& x, const Eigen::Matrix3d& r,
                       const CameraPose& pose, const CameraIntrinsics& k,
                       const SceneSpec& spec) {
  if (projection_depth(x, r, pose.t_prime) < spec.min_depth) return false;
  const PixelPoint uv = project(x, r, pose.t_prime, k);
  return uv.x() >= 0.0 && uv.x() <= spec.image_width && uv.y() >= 0.0 &&
         uv.y() <= spec.image_height;
}

// Uniform direction on the unit sphere.
inline Eigen::Vector3d random_direction(std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::Vector3d dir;
  do {
    dir = Eigen::Vector3d(gauss(rng), gauss(rng), gauss(rng));
  } while (dir.norm() < 1e-6);
  return dir.normalized();
}

}  // namespace detail

// Generates the rig, the trajectory, and the observation set. Every wand
// frame is resampled until both of its markers clear the frustum of at
// least two cameras, so the noise-free mask always triangulates; if a frame
// cannot be placed the spec does not admit 2-camera coverage.
inline std::pair<GroundTruth, ObservationSet> generate_scene(
    const SceneSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> chance(0.0, 1.0);

  GroundTruth truth;

  // Rig: jittered ring, looking at the target from above.
  for (int n = 0; n < spec.num_cameras; ++n) {
    const double azimuth = 2.0 * kPi * n / spec.num_cameras + 0.2 * unit(rng);
    const double radius = spec.ring_radius + 0.3 * unit(rng);
    std::uniform_real_distribution<double> height(spec.camera_height_min,
                                                  spec.camera_height_max);
    const WorldPoint center(radius * std::cos(azimuth),
                            radius * std::sin(azimuth), height(rng));
    const Eigen::Matrix3d r = look_at_rotation(center, spec.look_at);
    CameraPose pose;
    pose.angles = euler_from_rotation(r);
    // Recompute t' from the angle-reconstructed rotation so the pose is
    // exactly self-consistent.
    pose.t_prime = -rotation_from_euler(pose.angles) * center;
    truth.poses.push_back(pose);

    CameraIntrinsics k;
    std::uniform_real_distribution<double> focal(spec.focal_min,
                                                 spec.focal_max);
    k.f = focal(rng);
    k.alpha = 0.5 * spec.image_width + spec.principal_jitter * unit(rng);
    k.beta = 0.5 * spec.image_height + spec.principal_jitter * unit(rng);
    std::uniform_real_distribution<double> gamma(spec.gamma_min,
                                                 spec.gamma_max);
    k.gamma = gamma(rng);
    truth.intrinsics.push_back(k);
  }
  const std::vector<Eigen::Matrix3d> rotations = rotations_of(truth.poses);

  // Trajectory. The midpoint walks inside a box; the first low frames keep
  // both markers at or below the low-zone ceiling.
  const int low_frames =
      std::min((spec.m_cal + 1) / 2, spec.num_frames);
  const double half = 0.5 * spec.wand_length;
  const double floor_z = half + 0.05;
  Eigen::Vector3d mid(0.0, 0.0,
                      0.5 * (floor_z + spec.low_zone_ceiling - half));
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();

  const auto frustum_count = [&](const WorldPoint& x) {
    int count = 0;
    for (int n = 0; n < spec.num_cameras; ++n) {
      if (detail::in_frustum(x, rotations[n], truth.poses[n],
                             truth.intrinsics[n], spec)) {
        ++count;
      }
    }
    return count;
  };

  for (int frame = 0; frame < spec.num_frames; ++frame) {
    const double ceiling =
        (frame < low_frames ? spec.low_zone_ceiling : spec.camera_height_max) -
        half;
    bool placed = false;
    for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
      velocity = 0.8 * velocity +
                 0.2 * Eigen::Vector3d(0.6 * unit(rng), 0.6 * unit(rng),
                                       0.4 * unit(rng));
      Eigen::Vector3d candidate = mid + velocity;
      candidate.x() = std::clamp(candidate.x(), -spec.walk_extent,
                                 spec.walk_extent);
      candidate.y() = std::clamp(candidate.y(), -spec.walk_extent,
                                 spec.walk_extent);
      candidate.z() = std::clamp(candidate.z(), floor_z, ceiling);

      const Eigen::Vector3d dir = detail::random_direction(rng);
      WorldPoint a = candidate + half * dir;
      WorldPoint b = candidate - half * dir;
      if (frame < low_frames &&
          std::max(a.z(), b.z()) > spec.low_zone_ceiling) {
        continue;
      }
      if (frustum_count(a) < 2 || frustum_count(b) < 2) continue;
      truth.markers.push_back(a);
      truth.markers.push_back(b);
      mid = candidate;
      placed = true;
    }
    if (!placed) {
      throw DegenerateGeometryError(
          "generate_scene: no 2-camera coverage for frame " +
          std::to_string(frame));
    }
  }

  // Frustum mask and exact projections.
  const int num_markers = 2 * spec.num_frames;
  ObservationSet obs(num_markers, spec.num_cameras, spec.wand_length);
  for (int m = 0; m < num_markers; ++m) {
    for (int n = 0; n < spec.num_cameras; ++n) {
      if (detail::in_frustum(truth.markers[m], rotations[n], truth.poses[n],
                             truth.intrinsics[n], spec)) {
        obs.set(m, n, project(truth.markers[m], rotations[n],
                              truth.poses[n].t_prime, truth.intrinsics[n]));
      }
    }
  }

  // Random dropout, then restore observations where a marker would fall
  // below two cameras.
  if (spec.dropout > 0.0) {
    std::vector<std::uint8_t> frustum_mask = obs.mask;
    for (int m = 0; m < num_markers; ++m) {
      for (int n = 0; n < spec.num_cameras; ++n) {
        if (obs.visible(m, n) && chance(rng) < spec.dropout) obs.erase(m, n);
      }
    }
    for (int m = 0; m < num_markers; ++m) {
      for (int n = 0; n < spec.num_cameras && obs.marker_visibility(m) < 2;
           ++n) {
        if (frustum_mask[obs.index(m, n)] && !obs.visible(m, n)) {
          obs.set(m, n, project(truth.markers[m], rotations[n],
                                truth.poses[n].t_prime, truth.intrinsics[n]));
        }
      }
    }
  }

  // Pixel noise, drawn only for surviving observations.
  if (spec.pixel_noise > 0.0) {
    std::normal_distribution<double> gauss(0.0, spec.pixel_noise);
    for (int m = 0; m < num_markers; ++m) {
      for (int n = 0; n < spec.num_cameras; ++n) {
        if (!obs.visible(m, n)) continue;
        const PixelPoint clean = obs.fp(m, n);
        obs.set(m, n, PixelPoint(clean.x() + gauss(rng),
                                 clean.y() + gauss(rng)));
      }
    }
  }

  obs.validate();
  return {std::move(truth), std::move(obs)};
}

struct PerturbMagnitudes {
  double angles_rad = 0.0;
  double translations_m = 0.0;
  double markers_m = 0.0;

  void validate() const {
    if (!(angles_rad >= 0.0) || !(translations_m >= 0.0) ||
        !(markers_m >= 0.0)) {
      throw InvalidArgumentError("PerturbMagnitudes: must be non-negative");
    }
  }
};

// Initial state for refinement: truth plus uniform perturbations of the
// given magnitudes, with markers and translations clamped to the structural
// box of the translation subproblem.
inline SceneState perturb_state(const GroundTruth& truth,
                                const PerturbMagnitudes& mags,
                                std::uint64_t seed, double bound = 10.0) {
  mags.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  SceneState state = truth.state();
  for (auto& pose : state.poses) {
    pose.angles.phi_x += mags.angles_rad * unit(rng);
    pose.angles.phi_y += mags.angles_rad * unit(rng);
    pose.angles.phi_z += mags.angles_rad * unit(rng);
    for (int k = 0; k < 3; ++k) {
      pose.t_prime[k] = std::clamp(
          pose.t_prime[k] + mags.translations_m * unit(rng), -bound, bound);
    }
  }
  for (auto& marker : state.markers) {
    for (int k = 0; k < 3; ++k) {
      marker[k] = std::clamp(marker[k] + mags.markers_m * unit(rng), -bound,
                             bound);
    }
  }
  return state;
}

}  // namespace wandcal
