#pragma once

#include <vector>

#include "wandcal/core.hpp"
#include "wandcal/geometry.hpp"

namespace wandcal {

/// Dense M x N grid of feature points with a visibility mask. Row m is a
/// marker, column n a camera; mask(m, n) != 0 iff a measurement is present.
struct FpGrid {
  int num_markers = 0;  // M
  int num_cameras = 0;  // N
  std::vector<std::uint8_t> mask;
  std::vector<PixelPoint> fps;

  FpGrid() = default;
  FpGrid(int markers, int cameras)
      : num_markers(markers),
        num_cameras(cameras),
        mask(static_cast<std::size_t>(markers) * cameras, 0),
        fps(static_cast<std::size_t>(markers) * cameras, PixelPoint::Zero()) {
    if (markers < 0 || cameras < 0) {
      throw InvalidArgumentError("grid dimensions must be non-negative");
    }
  }

  std::size_t index(int m, int n) const {
    return static_cast<std::size_t>(m) * num_cameras + n;
  }
  bool visible(int m, int n) const { return mask[index(m, n)] != 0; }
  const PixelPoint& fp(int m, int n) const { return fps[index(m, n)]; }

  void set(int m, int n, const PixelPoint& fp) {
    fps[index(m, n)] = fp;
    mask[index(m, n)] = 1;
  }
  void erase(int m, int n) {
    mask[index(m, n)] = 0;
    fps[index(m, n)] = PixelPoint::Zero();
  }

  int marker_visibility(int m) const {
    int count = 0;
    for (int n = 0; n < num_cameras; ++n) count += visible(m, n) ? 1 : 0;
    return count;
  }
  int camera_visibility(int n) const {
    int count = 0;
    for (int m = 0; m < num_markers; ++m) count += visible(m, n) ? 1 : 0;
    return count;
  }
  int visible_pairs() const {
    int count = 0;
    for (const auto flag : mask) count += flag ? 1 : 0;
    return count;
  }
};

/// Measured pixel observations of a waved wand. Marker rows (2m, 2m+1) form
/// one wand frame, so M is even and M' = M/2 frames exist.
struct ObservationSet : FpGrid {
  double wand_length = 0.0;  // d, meters

  ObservationSet() = default;
  ObservationSet(int markers, int cameras, double d)
      : FpGrid(markers, cameras), wand_length(d) {}

  int num_frames() const { return num_markers / 2; }

  void validate() const {
    if (num_markers % 2 != 0) {
      throw InvalidArgumentError("marker count must be even (wand pairs)");
    }
    if (!(wand_length > 0.0)) {
      throw InvalidArgumentError("wand length must be positive");
    }
    for (int m = 0; m < num_markers; ++m) {
      if (marker_visibility(m) < 2) {
        throw DegenerateGeometryError("marker " + std::to_string(m) +
                                      " is visible to fewer than 2 cameras");
      }
    }
  }
};

/// Observations mapped through normalize_fp; same mask as the source set.
struct NormalizedObservations : FpGrid {
  double wand_length = 0.0;

  NormalizedObservations() = default;
  NormalizedObservations(int markers, int cameras, double d)
      : FpGrid(markers, cameras), wand_length(d) {}
};

inline NormalizedObservations normalize_observations(
    const ObservationSet& obs, const std::vector<CameraIntrinsics>& intrinsics) {
  if (static_cast<int>(intrinsics.size()) != obs.num_cameras) {
    throw InvalidArgumentError("intrinsics count does not match camera count");
  }
  NormalizedObservations out(obs.num_markers, obs.num_cameras, obs.wand_length);
  for (int m = 0; m < obs.num_markers; ++m) {
    for (int n = 0; n < obs.num_cameras; ++n) {
      if (obs.visible(m, n)) {
        out.set(m, n, normalize_fp(obs.fp(m, n), intrinsics[n]));
      }
    }
  }
  return out;
}

}  // namespace wandcal
