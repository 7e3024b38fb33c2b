#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "wandcal/residuals.hpp"
#include "wandcal/simulate.hpp"

namespace {

using namespace wandcal;

bool same_truth(const GroundTruth& a, const GroundTruth& b) {
  if (a.poses.size() != b.poses.size() ||
      a.markers.size() != b.markers.size()) {
    return false;
  }
  for (std::size_t n = 0; n < a.poses.size(); ++n) {
    if (a.poses[n].angles.phi_x != b.poses[n].angles.phi_x ||
        a.poses[n].angles.phi_y != b.poses[n].angles.phi_y ||
        a.poses[n].angles.phi_z != b.poses[n].angles.phi_z ||
        a.poses[n].t_prime != b.poses[n].t_prime ||
        a.intrinsics[n].f != b.intrinsics[n].f ||
        a.intrinsics[n].alpha != b.intrinsics[n].alpha ||
        a.intrinsics[n].beta != b.intrinsics[n].beta ||
        a.intrinsics[n].gamma != b.intrinsics[n].gamma) {
      return false;
    }
  }
  for (std::size_t m = 0; m < a.markers.size(); ++m) {
    if (a.markers[m] != b.markers[m]) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("noise-free scenes reproject exactly", "[simulator]") {
  SceneSpec spec;
  spec.num_cameras = 4;
  spec.num_frames = 40;
  spec.seed = 501;
  const auto [truth, obs] = generate_scene(spec);

  REQUIRE(obs.num_markers == 80);
  REQUIRE(eval_P(truth.poses, truth.intrinsics, truth.markers, obs) == 0.0);
}

TEST_CASE("wand frames have exact length", "[simulator]") {
  SceneSpec spec;
  spec.num_frames = 60;
  spec.wand_length = 0.37;
  spec.seed = 503;
  const auto [truth, obs] = generate_scene(spec);

  for (int frame = 0; frame < spec.num_frames; ++frame) {
    const double len =
        (truth.markers[2 * frame] - truth.markers[2 * frame + 1]).norm();
    REQUIRE(len == Catch::Approx(spec.wand_length).margin(1e-12));
  }
  const WandLengthStats stats = wand_length_stats(truth.markers);
  REQUIRE(stats.mean == Catch::Approx(spec.wand_length).margin(1e-12));
  REQUIRE(stats.stddev <= 1e-12);
}

TEST_CASE("generation is deterministic under a fixed seed", "[simulator]") {
  SceneSpec spec;
  spec.num_frames = 30;
  spec.pixel_noise = 0.5;
  spec.dropout = 0.2;
  spec.seed = 509;

  const auto [truth_a, obs_a] = generate_scene(spec);
  const auto [truth_b, obs_b] = generate_scene(spec);
  REQUIRE(same_truth(truth_a, truth_b));
  REQUIRE(obs_a.mask == obs_b.mask);
  for (std::size_t i = 0; i < obs_a.fps.size(); ++i) {
    REQUIRE(obs_a.fps[i] == obs_b.fps[i]);
  }

  SceneSpec other = spec;
  other.seed = 510;
  const auto [truth_c, obs_c] = generate_scene(other);
  REQUIRE_FALSE(same_truth(truth_a, truth_c));
}

TEST_CASE("ground truth is independent of noise and dropout settings",
          "[simulator]") {
  SceneSpec clean;
  clean.num_frames = 30;
  clean.seed = 521;
  SceneSpec noisy = clean;
  noisy.pixel_noise = 1.0;
  noisy.dropout = 0.3;

  const auto [truth_clean, obs_clean] = generate_scene(clean);
  const auto [truth_noisy, obs_noisy] = generate_scene(noisy);
  REQUIRE(same_truth(truth_clean, truth_noisy));

  // Dropout only removes observations present in the clean frustum mask,
  // and never below two cameras per marker.
  for (int m = 0; m < obs_noisy.num_markers; ++m) {
    REQUIRE(obs_noisy.marker_visibility(m) >= 2);
    for (int n = 0; n < obs_noisy.num_cameras; ++n) {
      if (obs_noisy.visible(m, n)) REQUIRE(obs_clean.visible(m, n));
    }
  }
}

TEST_CASE("dropout thins the mask at the configured rate", "[simulator]") {
  // More cameras per marker make the >= 2 repair negligibly rare.
  long long kept = 0;
  long long frustum = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SceneSpec spec;
    spec.num_cameras = 8;
    spec.num_frames = 150;
    spec.seed = 600 + seed;
    SceneSpec dropped = spec;
    dropped.dropout = 0.3;

    const auto [truth_a, obs_full] = generate_scene(spec);
    const auto [truth_b, obs_thin] = generate_scene(dropped);
    REQUIRE(same_truth(truth_a, truth_b));
    frustum += obs_full.visible_pairs();
    kept += obs_thin.visible_pairs();
  }
  const double expected = 0.7 * static_cast<double>(frustum);
  const double sigma = std::sqrt(0.3 * 0.7 * static_cast<double>(frustum));
  REQUIRE(std::abs(static_cast<double>(kept) - expected) <= 3.0 * sigma);
}

TEST_CASE("the first m_cal markers stay below every camera", "[simulator]") {
  SceneSpec spec;
  spec.num_frames = 150;
  spec.m_cal = 120;
  spec.seed = 531;
  const auto [truth, obs] = generate_scene(spec);

  double lowest_center = std::numeric_limits<double>::infinity();
  for (const auto& pose : truth.poses) {
    lowest_center = std::min(lowest_center, camera_center(pose).z());
  }
  REQUIRE(lowest_center >= spec.camera_height_min - 1e-9);
  for (int m = 0; m < spec.m_cal; ++m) {
    REQUIRE(truth.markers[m].z() <= spec.low_zone_ceiling + 1e-12);
    REQUIRE(truth.markers[m].z() < lowest_center);
  }
}

TEST_CASE("noise level shows up in the reprojection RMS", "[simulator]") {
  SceneSpec spec;
  spec.num_frames = 150;
  spec.pixel_noise = 0.5;
  spec.seed = 541;
  const auto [truth, obs] = generate_scene(spec);

  const double rms =
      reprojection_rms(truth.poses, truth.intrinsics, truth.markers, obs);
  REQUIRE(rms == Catch::Approx(0.5).margin(0.05));
}

TEST_CASE("impossible coverage is reported", "[simulator]") {
  SceneSpec spec;
  spec.image_width = 2;
  spec.image_height = 2;
  spec.num_frames = 4;
  REQUIRE_THROWS_AS(generate_scene(spec), DegenerateGeometryError);
}

TEST_CASE("spec validation", "[simulator]") {
  SceneSpec spec;

  SECTION("camera count") {
    spec.num_cameras = 1;
    REQUIRE_THROWS_AS(generate_scene(spec), InvalidArgumentError);
  }
  SECTION("cameras inside the low-start zone") {
    spec.camera_height_min = 1.2;
    REQUIRE_THROWS_AS(generate_scene(spec), InvalidArgumentError);
  }
  SECTION("dropout rate") {
    spec.dropout = 1.0;
    REQUIRE_THROWS_AS(generate_scene(spec), InvalidArgumentError);
  }
  SECTION("frame count") {
    spec.num_frames = 1;
    REQUIRE_THROWS_AS(generate_scene(spec), InvalidArgumentError);
  }
}

TEST_CASE("perturb_state", "[simulator]") {
  SceneSpec spec;
  spec.num_frames = 20;
  spec.seed = 551;
  const auto [truth, obs] = generate_scene(spec);

  SECTION("zero magnitudes reproduce truth exactly") {
    const SceneState state = perturb_state(truth, {}, 7);
    for (std::size_t n = 0; n < truth.poses.size(); ++n) {
      REQUIRE(state.poses[n].angles.phi_x == truth.poses[n].angles.phi_x);
      REQUIRE(state.poses[n].t_prime == truth.poses[n].t_prime);
    }
    for (std::size_t m = 0; m < truth.markers.size(); ++m) {
      REQUIRE(state.markers[m] == truth.markers[m]);
    }
  }

  SECTION("per-component deviations respect the magnitudes") {
    PerturbMagnitudes mags;
    mags.angles_rad = deg_to_rad(5.0);
    mags.translations_m = 0.2;
    mags.markers_m = 0.1;
    const SceneState state = perturb_state(truth, mags, 11);

    bool moved = false;
    for (std::size_t n = 0; n < truth.poses.size(); ++n) {
      REQUIRE(std::abs(state.poses[n].angles.phi_x -
                       truth.poses[n].angles.phi_x) <= mags.angles_rad);
      REQUIRE(std::abs(state.poses[n].angles.phi_y -
                       truth.poses[n].angles.phi_y) <= mags.angles_rad);
      REQUIRE(std::abs(state.poses[n].angles.phi_z -
                       truth.poses[n].angles.phi_z) <= mags.angles_rad);
      for (int k = 0; k < 3; ++k) {
        REQUIRE(std::abs(state.poses[n].t_prime[k] -
                         truth.poses[n].t_prime[k]) <= mags.translations_m);
        moved = moved || state.poses[n].t_prime[k] != truth.poses[n].t_prime[k];
      }
    }
    for (std::size_t m = 0; m < truth.markers.size(); ++m) {
      for (int k = 0; k < 3; ++k) {
        REQUIRE(std::abs(state.markers[m][k] - truth.markers[m][k]) <=
                mags.markers_m);
      }
    }
    REQUIRE(moved);
  }

  SECTION("components are clamped to the structural bound") {
    PerturbMagnitudes mags;
    mags.translations_m = 0.5;
    mags.markers_m = 0.5;
    const SceneState state = perturb_state(truth, mags, 13, 1.0);
    for (const auto& pose : state.poses) {
      REQUIRE(pose.t_prime.cwiseAbs().maxCoeff() <= 1.0);
    }
    for (const auto& marker : state.markers) {
      REQUIRE(marker.cwiseAbs().maxCoeff() <= 1.0);
    }
  }

  SECTION("negative magnitudes are rejected") {
    PerturbMagnitudes mags;
    mags.markers_m = -0.1;
    REQUIRE_THROWS_AS(perturb_state(truth, mags, 3), InvalidArgumentError);
  }
}
