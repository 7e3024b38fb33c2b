#pragma once

// Per-camera angle refinement. With the markers X and the translation t'
// held fixed, the residuals (U_mn, V_mn) of a single camera depend only on
// its three Euler angles, so each camera's share of E splits off as an
// independent nonlinear least-squares problem in three unknowns. It is
// minimized here by damped Levenberg-Marquardt with analytic Jacobians;
// the inner linear solve is a 3x3 Cholesky.

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "wandcal/geometry.hpp"
#include "wandcal/observations.hpp"
#include "wandcal/residuals.hpp"

namespace wandcal {

struct LmConfig {
  double lambda0 = 1e-3;        // initial damping
  double lambda_up = 10.0;      // factor applied after a rejected step
  double lambda_down = 10.0;    // factor applied after an accepted step
  int max_iterations = 50;
  double gradient_tol = 1e-10;  // on the max-norm of J^T r
  double step_tol = 1e-12;      // on the step norm relative to the angles

  void validate() const {
    if (!(lambda0 > 0.0) || !(lambda_up > 1.0) || !(lambda_down > 1.0) ||
        max_iterations < 1 || !(gradient_tol > 0.0) || !(step_tol > 0.0)) {
      throw InvalidArgumentError("LmConfig: invalid solver settings");
    }
  }
};

// Why a solve finished.
enum class LmStop {
  GradientTolerance,  // max-norm of J^T r under gradient_tol
  StepTolerance,      // proposed step negligibly small
  IterationLimit,     // max_iterations accepted/rejected cycles used up
  Stalled,            // damping grew past any useful scale without progress
};

inline const char* to_string(LmStop stop) {
  switch (stop) {
    case LmStop::GradientTolerance: return "gradient-tolerance";
    case LmStop::StepTolerance: return "step-tolerance";
    case LmStop::IterationLimit: return "iteration-limit";
    case LmStop::Stalled: return "stalled";
  }
  return "unknown";
}

struct AngleSolveReport {
  int iterations = 0;
  double initial_e = 0.0;  // E_phi_n at the starting angles
  double final_e = 0.0;    // E_phi_n at the returned angles
  LmStop stop = LmStop::IterationLimit;
};

namespace detail {

// Stacked residual vector (U_m, V_m) over the markers camera n observes,
// in ascending marker order.
inline Eigen::VectorXd camera_residuals(int n, const EulerAngles& angles,
                                        const Eigen::Vector3d& t_prime,
                                        const std::vector<WorldPoint>& markers,
                                        const NormalizedObservations& obs_norm) {
  const Eigen::Matrix3d r = rotation_from_euler(angles);
  Eigen::VectorXd res(2 * obs_norm.camera_visibility(n));
  int row = 0;
  for (int m = 0; m < obs_norm.num_markers; ++m) {
    if (!obs_norm.visible(m, n)) continue;
    const ResidualPair rp =
        residual_uv(markers[m], r, t_prime, obs_norm.fp(m, n));
    res(row++) = rp.u;
    res(row++) = rp.v;
  }
  if (!res.allFinite()) {
    throw NumericError("solve_angles: non-finite residual for camera " +
                       std::to_string(n));
  }
  return res;
}

}  // namespace detail

// Jacobian of the stacked residual vector with respect to the camera's
// Euler angles; 2K x 3 for K visible markers, columns ordered
// (phi_x, phi_y, phi_z). The translation terms of U and V are constant in
// the angles, so each entry is a derivative of a rotation row only:
//   dU/dphi_k = (ubar * dr3_k - dr1_k) . x
//   dV/dphi_k = (vbar * dr3_k - dr2_k) . x
inline Eigen::MatrixXd angle_jacobian(int n, const CameraPose& pose,
                                      const std::vector<WorldPoint>& markers,
                                      const NormalizedObservations& obs_norm) {
  if (static_cast<int>(markers.size()) != obs_norm.num_markers) {
    throw InvalidArgumentError("angle_jacobian: marker count mismatch");
  }
  const std::array<Eigen::Matrix3d, 3> dr =
      rotation_derivatives(pose.angles);
  Eigen::MatrixXd jac(2 * obs_norm.camera_visibility(n), 3);
  int row = 0;
  for (int m = 0; m < obs_norm.num_markers; ++m) {
    if (!obs_norm.visible(m, n)) continue;
    const WorldPoint& x = markers[m];
    const PixelPoint& fp = obs_norm.fp(m, n);
    for (int k = 0; k < 3; ++k) {
      jac(row, k) = (fp.x() * dr[k].row(2) - dr[k].row(0)).dot(x);
      jac(row + 1, k) = (fp.y() * dr[k].row(2) - dr[k].row(1)).dot(x);
    }
    row += 2;
  }
  return jac;
}

// Minimizes E_phi_n over camera n's Euler angles from the pose's current
// estimate. Only strictly improving steps are accepted, so the returned
// energy never exceeds the starting one.
inline std::pair<EulerAngles, AngleSolveReport> solve_angles(
    int n, const CameraPose& pose, const std::vector<WorldPoint>& markers,
    const NormalizedObservations& obs_norm, const LmConfig& cfg = {}) {
  cfg.validate();
  if (n < 0 || n >= obs_norm.num_cameras) {
    throw InvalidArgumentError("solve_angles: camera index out of range");
  }
  if (static_cast<int>(markers.size()) != obs_norm.num_markers) {
    throw InvalidArgumentError("solve_angles: marker count mismatch");
  }
  if (obs_norm.camera_visibility(n) < 3) {
    throw InsufficientObservationsError(
        "solve_angles: camera " + std::to_string(n) + " observes only " +
        std::to_string(obs_norm.camera_visibility(n)) +
        " markers; need at least 3");
  }

  EulerAngles angles = pose.angles;
  Eigen::VectorXd res =
      detail::camera_residuals(n, angles, pose.t_prime, markers, obs_norm);
  double energy = res.squaredNorm();

  AngleSolveReport report;
  report.initial_e = energy;
  report.final_e = energy;

  double lambda = cfg.lambda0;
  constexpr double kLambdaCeiling = 1e15;

  CameraPose work = pose;
  for (int iter = 1; iter <= cfg.max_iterations; ++iter) {
    work.angles = angles;
    const Eigen::MatrixXd jac = angle_jacobian(n, work, markers, obs_norm);
    const Eigen::Vector3d gradient = jac.transpose() * res;
    if (gradient.cwiseAbs().maxCoeff() < cfg.gradient_tol) {
      report.stop = LmStop::GradientTolerance;
      break;
    }
    const Eigen::Matrix3d normal = jac.transpose() * jac;

    report.iterations = iter;
    bool accepted = false;
    while (!accepted) {
      Eigen::Matrix3d damped = normal;
      damped.diagonal().array() += lambda;
      const Eigen::LLT<Eigen::Matrix3d> llt(damped);
      if (llt.info() != Eigen::Success) {
        // Numerically non-PD despite the damping; stiffen and retry.
        lambda *= cfg.lambda_up;
        if (lambda > kLambdaCeiling) {
          report.stop = LmStop::Stalled;
          report.final_e = energy;
          return {angles, report};
        }
        continue;
      }
      const Eigen::Vector3d step = llt.solve(-gradient);
      const double angle_scale =
          std::sqrt(angles.phi_x * angles.phi_x + angles.phi_y * angles.phi_y +
                    angles.phi_z * angles.phi_z);
      if (step.norm() < cfg.step_tol * (angle_scale + cfg.step_tol)) {
        report.stop = LmStop::StepTolerance;
        report.final_e = energy;
        return {angles, report};
      }

      EulerAngles trial = angles;
      trial.phi_x += step.x();
      trial.phi_y += step.y();
      trial.phi_z += step.z();
      const Eigen::VectorXd trial_res = detail::camera_residuals(
          n, trial, pose.t_prime, markers, obs_norm);
      const double trial_energy = trial_res.squaredNorm();
      if (trial_energy < energy) {
        angles = trial;
        res = trial_res;
        energy = trial_energy;
        lambda = std::max(lambda / cfg.lambda_down, 1e-12);
        accepted = true;
      } else {
        lambda *= cfg.lambda_up;
        if (lambda > kLambdaCeiling) {
          report.stop = LmStop::Stalled;
          report.final_e = energy;
          return {angles, report};
        }
      }
    }
  }

  report.final_e = energy;
  return {angles, report};
}

}  // namespace wandcal
