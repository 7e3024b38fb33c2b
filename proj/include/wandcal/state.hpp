#pragma once

#include <vector>

#include "wandcal/core.hpp"
#include "wandcal/geometry.hpp"

namespace wandcal {

/// The unknowns of the calibration problem: one pose per camera and one
/// world point per marker. Intrinsics are known and live alongside, not here.
struct SceneState {
  std::vector<CameraPose> poses;       // size N
  std::vector<WorldPoint> markers;     // size M

  int num_cameras() const { return static_cast<int>(poses.size()); }
  int num_markers() const { return static_cast<int>(markers.size()); }
};

}  // namespace wandcal
