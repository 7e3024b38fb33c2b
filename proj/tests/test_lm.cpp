#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "scene_fixtures.hpp"
#include "wandcal/lm_solver.hpp"
#include "wandcal/residuals.hpp"

namespace {

using namespace wandcal;
using wandcal::testing::Scene;
using wandcal::testing::make_ring_scene;

// Observations that need not come from any actual scene: the Jacobian
// identity holds for arbitrary (markers, focal-plane values).
struct RandomInstance {
  std::vector<WorldPoint> markers;
  NormalizedObservations obs;
  CameraPose pose;
};

RandomInstance make_random_instance(std::mt19937_64& rng, int num_markers) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  RandomInstance inst;
  inst.obs = NormalizedObservations(num_markers, 1, 1.0);
  for (int m = 0; m < num_markers; ++m) {
    inst.markers.push_back(
        WorldPoint(3.0 * unit(rng), 3.0 * unit(rng), 3.0 * unit(rng)));
    inst.obs.set(m, 0, PixelPoint(0.5 * unit(rng), 0.5 * unit(rng)));
  }
  inst.pose.angles = {kPi * unit(rng), 0.5 * kPi * unit(rng), kPi * unit(rng)};
  inst.pose.t_prime =
      Eigen::Vector3d(unit(rng), unit(rng), 5.0 + unit(rng));
  return inst;
}

}  // namespace

TEST_CASE("angle_jacobian at the identity matches the symbolic derivation",
          "[lm]") {
  std::mt19937_64 rng(401);
  RandomInstance inst = make_random_instance(rng, 6);
  inst.pose.angles = {0.0, 0.0, 0.0};

  const Eigen::MatrixXd jac =
      angle_jacobian(0, inst.pose, inst.markers, inst.obs);
  REQUIRE(jac.rows() == 12);
  for (int m = 0; m < 6; ++m) {
    const WorldPoint& p = inst.markers[m];
    const double ubar = inst.obs.fp(m, 0).x();
    const double vbar = inst.obs.fp(m, 0).y();
    // At R = I the elementary-rotation derivatives give, per marker (x,y,z):
    //   dU = ( ubar*y, -ubar*x - z,  y )
    //   dV = ( vbar*y + z, -vbar*x, -x )
    REQUIRE(jac(2 * m, 0) == Catch::Approx(ubar * p.y()).margin(1e-14));
    REQUIRE(jac(2 * m, 1) ==
            Catch::Approx(-ubar * p.x() - p.z()).margin(1e-14));
    REQUIRE(jac(2 * m, 2) == Catch::Approx(p.y()).margin(1e-14));
    REQUIRE(jac(2 * m + 1, 0) ==
            Catch::Approx(vbar * p.y() + p.z()).margin(1e-14));
    REQUIRE(jac(2 * m + 1, 1) == Catch::Approx(-vbar * p.x()).margin(1e-14));
    REQUIRE(jac(2 * m + 1, 2) == Catch::Approx(-p.x()).margin(1e-14));
  }
}

TEST_CASE("angle_jacobian agrees with central finite differences", "[lm]") {
  std::mt19937_64 rng(409);
  const double step = 1e-6;
  for (int trial = 0; trial < 100; ++trial) {
    RandomInstance inst = make_random_instance(rng, 5);
    const Eigen::MatrixXd jac =
        angle_jacobian(0, inst.pose, inst.markers, inst.obs);

    for (int k = 0; k < 3; ++k) {
      EulerAngles plus = inst.pose.angles;
      EulerAngles minus = inst.pose.angles;
      (k == 0 ? plus.phi_x : k == 1 ? plus.phi_y : plus.phi_z) += step;
      (k == 0 ? minus.phi_x : k == 1 ? minus.phi_y : minus.phi_z) -= step;
      const Eigen::Matrix3d r_plus = rotation_from_euler(plus);
      const Eigen::Matrix3d r_minus = rotation_from_euler(minus);
      for (int m = 0; m < 5; ++m) {
        const ResidualPair rp = residual_uv(inst.markers[m], r_plus,
                                            inst.pose.t_prime,
                                            inst.obs.fp(m, 0));
        const ResidualPair rm = residual_uv(inst.markers[m], r_minus,
                                            inst.pose.t_prime,
                                            inst.obs.fp(m, 0));
        const double fd_u = (rp.u - rm.u) / (2.0 * step);
        const double fd_v = (rp.v - rm.v) / (2.0 * step);
        CAPTURE(trial, k, m);
        REQUIRE(std::abs(jac(2 * m, k) - fd_u) <=
                1e-5 * std::max(1.0, std::abs(jac(2 * m, k))));
        REQUIRE(std::abs(jac(2 * m + 1, k) - fd_v) <=
                1e-5 * std::max(1.0, std::abs(jac(2 * m + 1, k))));
      }
    }
  }
}

TEST_CASE("masked markers contribute no Jacobian rows", "[lm]") {
  std::mt19937_64 rng(419);
  RandomInstance inst = make_random_instance(rng, 6);
  inst.obs.erase(2, 0);
  inst.obs.erase(4, 0);
  const Eigen::MatrixXd jac =
      angle_jacobian(0, inst.pose, inst.markers, inst.obs);
  REQUIRE(jac.rows() == 8);

  // The remaining rows are exactly those of the dense instance with the
  // masked markers' rows deleted.
  RandomInstance dense = inst;
  dense.obs.mask.assign(dense.obs.mask.size(), 1);
  const Eigen::MatrixXd full =
      angle_jacobian(0, dense.pose, dense.markers, dense.obs);
  int row = 0;
  for (int m = 0; m < 6; ++m) {
    if (m == 2 || m == 4) continue;
    REQUIRE((jac.row(row) - full.row(2 * m)).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(
        (jac.row(row + 1) - full.row(2 * m + 1)).cwiseAbs().maxCoeff() == 0.0);
    row += 2;
  }
}

TEST_CASE("solve_angles is a fixed point at ground truth", "[lm]") {
  std::mt19937_64 rng(421);
  Scene scene = make_ring_scene(rng, 3, 8);
  const NormalizedObservations norm = scene.normalized();
  for (int n = 0; n < 3; ++n) {
    const auto [angles, report] =
        solve_angles(n, scene.poses[n], scene.markers, norm);
    REQUIRE(report.final_e <= 1e-18);
    REQUIRE(report.stop == LmStop::GradientTolerance);
    REQUIRE(angles.phi_x == scene.poses[n].angles.phi_x);
    REQUIRE(angles.phi_y == scene.poses[n].angles.phi_y);
    REQUIRE(angles.phi_z == scene.poses[n].angles.phi_z);
  }
}

TEST_CASE("solve_angles recovers truth from a 2-degree perturbation", "[lm]") {
  std::mt19937_64 rng(431);
  Scene scene = make_ring_scene(rng, 4, 12);
  const NormalizedObservations norm = scene.normalized();
  const double two_deg = deg_to_rad(2.0);

  for (int n = 0; n < 4; ++n) {
    CameraPose start = scene.poses[n];
    start.angles.phi_x += two_deg;
    start.angles.phi_y -= two_deg;
    start.angles.phi_z += two_deg;

    const auto [angles, report] =
        solve_angles(n, start, scene.markers, norm);
    CAPTURE(n, report.iterations, to_string(report.stop));
    REQUIRE(report.final_e <= report.initial_e);
    REQUIRE(std::abs(wrap_angle(angles.phi_x - scene.poses[n].angles.phi_x)) <
            1e-6);
    REQUIRE(std::abs(wrap_angle(angles.phi_y - scene.poses[n].angles.phi_y)) <
            1e-6);
    REQUIRE(std::abs(wrap_angle(angles.phi_z - scene.poses[n].angles.phi_z)) <
            1e-6);
  }
}

TEST_CASE("solve_angles descends monotonically from rough starts", "[lm]") {
  std::mt19937_64 rng(433);
  Scene scene = make_ring_scene(rng, 3, 10);
  const NormalizedObservations norm = scene.normalized();
  std::uniform_real_distribution<double> jitter(-deg_to_rad(10.0), deg_to_rad(10.0));

  for (int trial = 0; trial < 20; ++trial) {
    const int n = trial % 3;
    CameraPose start = scene.poses[n];
    start.angles.phi_x += jitter(rng);
    start.angles.phi_y += jitter(rng);
    start.angles.phi_z += jitter(rng);

    const auto [angles, report] =
        solve_angles(n, start, scene.markers, norm);
    REQUIRE(report.final_e <= report.initial_e);
    CameraPose solved = start;
    solved.angles = angles;
    REQUIRE(eval_E_camera(n, solved, scene.markers, norm) ==
            Catch::Approx(report.final_e).margin(1e-12));
  }
}

TEST_CASE("solve_angles is independent of other cameras' data", "[lm]") {
  std::mt19937_64 rng(439);
  Scene scene = make_ring_scene(rng, 3, 8);
  NormalizedObservations norm = scene.normalized();

  CameraPose start = scene.poses[1];
  start.angles.phi_x += 0.03;
  const auto [ref_angles, ref_report] =
      solve_angles(1, start, scene.markers, norm);

  // Scramble every other camera's focal-plane data and visibility.
  for (int m = 0; m < norm.num_markers; ++m) {
    norm.set(m, 0, PixelPoint(99.0, -99.0));
    if (m % 2 == 0) norm.erase(m, 2);
  }
  const auto [angles, report] = solve_angles(1, start, scene.markers, norm);
  REQUIRE(angles.phi_x == ref_angles.phi_x);
  REQUIRE(angles.phi_y == ref_angles.phi_y);
  REQUIRE(angles.phi_z == ref_angles.phi_z);
  REQUIRE(report.iterations == ref_report.iterations);
}

TEST_CASE("solve_angles input validation", "[lm]") {
  std::mt19937_64 rng(443);
  Scene scene = make_ring_scene(rng, 2, 4);
  NormalizedObservations norm = scene.normalized();

  SECTION("an under-observed camera is rejected") {
    norm.erase(0, 1);
    norm.erase(1, 1);
    REQUIRE(norm.camera_visibility(1) == 2);
    REQUIRE_THROWS_AS(solve_angles(1, scene.poses[1], scene.markers, norm),
                      InsufficientObservationsError);
  }

  SECTION("camera index range") {
    REQUIRE_THROWS_AS(solve_angles(2, scene.poses[0], scene.markers, norm),
                      InvalidArgumentError);
  }

  SECTION("bad config") {
    LmConfig cfg;
    cfg.lambda0 = -1.0;
    REQUIRE_THROWS_AS(solve_angles(0, scene.poses[0], scene.markers, norm, cfg),
                      InvalidArgumentError);
  }

  SECTION("non-finite observation data") {
    norm.set(0, 0, PixelPoint(std::numeric_limits<double>::quiet_NaN(), 0.0));
    REQUIRE_THROWS_AS(solve_angles(0, scene.poses[0], scene.markers, norm),
                      NumericError);
  }
}
