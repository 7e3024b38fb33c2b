#pragma once

#include <random>
#include <vector>

#include "wandcal/observations.hpp"
#include "wandcal/residuals.hpp"
#include "wandcal/state.hpp"

namespace wandcal::testing {

struct Scene {
  std::vector<CameraPose> poses;
  std::vector<CameraIntrinsics> intrinsics;
  std::vector<WorldPoint> markers;
  ObservationSet obs;

  SceneState state() const { return {poses, markers}; }
  NormalizedObservations normalized() const {
    return normalize_observations(obs, intrinsics);
  }
};

/// Hand-built consistent scene: cameras ringed at radius ~3 m and height
/// 2.0-2.5 m looking at (0,0,1); wand frames near the origin at heights that
/// stay below every camera. Observations are exact projections with full
/// visibility, so all residual metrics vanish at this state.
inline Scene make_ring_scene(std::mt19937_64& rng, int num_cameras = 3,
                             int num_markers = 8, double wand_length = 0.5) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Scene scene;
  scene.obs = ObservationSet(num_markers, num_cameras, wand_length);

  for (int n = 0; n < num_cameras; ++n) {
    const double azimuth = 2 * kPi * n / num_cameras + 0.1 * u(rng);
    const WorldPoint center(3.0 * std::cos(azimuth), 3.0 * std::sin(azimuth),
                            2.25 + 0.25 * u(rng));
    CameraPose pose;
    pose.angles = euler_from_rotation(look_at_rotation(center, {0, 0, 1}));
    // Recompute t' from the angle-reconstructed rotation so stored pose and
    // projections are exactly consistent.
    pose.t_prime = -rotation_from_euler(pose.angles) * center;
    scene.poses.push_back(pose);
    scene.intrinsics.push_back(
        {700.0 + 50.0 * u(rng), 640.0, 480.0, 1.0 + 0.01 * u(rng)});
  }

  for (int m = 0; m < num_markers; m += 2) {
    const WorldPoint mid(u(rng), u(rng), 1.0 + 0.3 * u(rng));
    Eigen::Vector3d dir(u(rng), u(rng), u(rng));
    if (dir.norm() < 1e-6) dir = Eigen::Vector3d(1, 0, 0);
    dir.normalize();
    scene.markers.push_back(mid - 0.5 * wand_length * dir);
    scene.markers.push_back(mid + 0.5 * wand_length * dir);
  }

  for (int m = 0; m < num_markers; ++m) {
    for (int n = 0; n < num_cameras; ++n) {
      scene.obs.set(m, n, project(scene.markers[m], scene.poses[n],
                                  scene.intrinsics[n]));
    }
  }
  return scene;
}

}  // namespace wandcal::testing
