#pragma once

// Command-line front end. Four subcommands cover the toolchain:
//
//   simulate     generate a synthetic rig + wand dataset (with ground truth)
//   calibrate    refine an initial state against a dataset
//   evaluate     compare a results file against ground truth, gauge-aligned
//   lp-selftest  run the LP solver against the enumeration oracle
//
// Exit codes: 0 success, 2 bad input (flags, schema, invalid configuration),
// 3 numerical failure (LP infeasible, divergence), 4 internal invariant
// breach. Every command is deterministic given its inputs and seed.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "wandcal/evaluate.hpp"
#include "wandcal/io.hpp"
#include "wandcal/lp/selftest.hpp"
#include "wandcal/refine.hpp"
#include "wandcal/simulate.hpp"

#include "CLI11.hpp"

namespace wandcal::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitBadInput = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitInternal = 4;

namespace detail {

inline std::string joined(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

inline void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    throw SchemaError(dir + ": cannot create output directory (" +
                      ec.message() + ")");
  }
}

}  // namespace detail

// --- simulate ----------------------------------------------------------------

struct SimulateOptions {
  SceneSpec spec;
  std::string out_dir = ".";
};

/// Writes <out>/dataset.json (observations + embedded truth) and
/// <out>/truth.json (poses, markers and intrinsics for `evaluate`).
inline int cmd_simulate(const SimulateOptions& opt) {
  const auto [truth, obs] = generate_scene(opt.spec);

  detail::ensure_dir(opt.out_dir);
  const SceneState truth_state = truth.state();
  const std::string dataset_path = detail::joined(opt.out_dir, "dataset.json");
  const std::string truth_path = detail::joined(opt.out_dir, "truth.json");
  io::write_json_file(dataset_path,
                      io::dataset_to_json(obs, truth.intrinsics, &truth_state));
  io::write_json_file(truth_path, io::truth_to_json(truth, obs.wand_length));

  const double density =
      static_cast<double>(obs.visible_pairs()) /
      (static_cast<double>(obs.num_markers) * obs.num_cameras);
  std::cout << "cameras:      " << obs.num_cameras << "\n"
            << "markers:      " << obs.num_markers << " (" << obs.num_frames()
            << " wand frames)\n"
            << "mask density: " << density << "\n"
            << "wrote " << dataset_path << "\n"
            << "wrote " << truth_path << "\n";
  return kExitOk;
}

// --- calibrate -----------------------------------------------------------------

/// Flag values that overlay the config file; unset means "not given".
struct CalibrateOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> m_cal;
  std::optional<double> bound;
  std::optional<int> max_iters;
  std::optional<double> tol;
  std::optional<double> trust_radius;
  std::optional<double> perturb_angles_deg;
  std::optional<double> perturb_translations;
  std::optional<double> perturb_markers;
};

struct CalibrateOptions {
  std::string dataset_path;
  std::string config_path;  // empty: defaults
  std::string init_path;    // empty: perturb the embedded truth
  std::string out_dir = ".";
  CalibrateOverrides flags;
};

namespace detail {

/// An initial state file is either a bare {poses, markers} object or a full
/// truth file (whose intrinsics are ignored here).
inline SceneState read_init_state(const std::string& path) {
  const io::json j = io::read_json_file(path);
  if (j.is_object() && j.contains("version")) {
    return io::truth_from_json(j, "$").state;
  }
  return io::state_from_json(j, "$");
}

inline io::RunConfig load_run_config(const CalibrateOptions& opt) {
  io::RunConfig rc;
  if (!opt.config_path.empty()) {
    rc = io::run_config_from_json(io::read_json_file(opt.config_path), "$");
  }
  const CalibrateOverrides& f = opt.flags;
  if (f.seed) rc.seed = *f.seed;
  if (f.m_cal) rc.refine.subproblem.m_cal = *f.m_cal;
  if (f.bound) rc.refine.subproblem.bound = *f.bound;
  if (f.max_iters) rc.refine.max_iterations = *f.max_iters;
  if (f.tol) rc.refine.rel_tol = *f.tol;
  if (f.trust_radius) rc.refine.trust_radius = *f.trust_radius;
  if (f.perturb_angles_deg) {
    rc.perturb.angles_rad = deg_to_rad(*f.perturb_angles_deg);
  }
  if (f.perturb_translations) rc.perturb.translations_m = *f.perturb_translations;
  if (f.perturb_markers) rc.perturb.markers_m = *f.perturb_markers;
  return rc;
}

}  // namespace detail

/// Reads the dataset, forms the initial state, runs refine, and writes
/// <out>/results.json plus <out>/iterations.csv.
inline int cmd_calibrate(const CalibrateOptions& opt) {
  const io::Dataset dataset =
      io::dataset_from_json(io::read_json_file(opt.dataset_path), "$");
  const io::RunConfig rc = detail::load_run_config(opt);

  SceneState init;
  if (!opt.init_path.empty()) {
    init = detail::read_init_state(opt.init_path);
  } else if (dataset.truth.has_value()) {
    GroundTruth truth;
    truth.poses = dataset.truth->poses;
    truth.markers = dataset.truth->markers;
    truth.intrinsics = dataset.intrinsics;
    init = perturb_state(truth, rc.perturb, rc.seed,
                         rc.refine.subproblem.bound);
  } else {
    std::cerr << "error: " << opt.dataset_path
              << " has no embedded truth and no --init file was given. "
                 "Computing an initial calibration from scratch is out of "
                 "scope; supply --init with a state file, or simulate a "
                 "dataset that carries its truth.\n";
    return kExitBadInput;
  }

  const RefineResult result =
      refine(init, dataset.obs, dataset.intrinsics, rc.refine);

  detail::ensure_dir(opt.out_dir);
  const std::string results_path = detail::joined(opt.out_dir, "results.json");
  const std::string csv_path = detail::joined(opt.out_dir, "iterations.csv");
  io::write_json_file(results_path,
                      io::results_to_json(result, dataset.obs.wand_length));
  io::write_text_file(csv_path, io::iterations_csv(result.report.iterations));

  std::cout << "stop:        " << to_string(result.report.stop);
  if (!result.report.message.empty()) {
    std::cout << " (" << result.report.message << ")";
  }
  std::cout << "\n"
            << "iterations:  " << result.report.iterations.size() << "\n"
            << "E:           " << result.report.initial_e << " -> "
            << result.report.final_e << "\n";
  try {
    std::cout << "RMS (px):    "
              << reprojection_rms_px(result.state.poses, dataset.intrinsics,
                                     result.state.markers, dataset.obs)
              << "\n";
  } catch (const BehindCameraError&) {
    std::cout << "RMS (px):    n/a (marker behind a camera)\n";
  }
  std::cout << "wrote " << results_path << "\n"
            << "wrote " << csv_path << "\n";

  const bool ok = result.report.stop == RefineStop::Converged ||
                  result.report.stop == RefineStop::IterationLimit;
  return ok ? kExitOk : kExitNumerical;
}

// --- evaluate ------------------------------------------------------------------

struct EvaluateOptions {
  std::string results_path;
  std::string truth_path;
  std::string out_dir = ".";
};

namespace detail {

inline std::string metrics_csv(const EvalMetrics& metrics) {
  std::ostringstream out;
  out.precision(17);
  out << "metric,camera,value\n";
  for (std::size_t n = 0; n < metrics.center_errors.size(); ++n) {
    out << "center_error_m," << n << "," << metrics.center_errors[n] << "\n";
  }
  for (std::size_t n = 0; n < metrics.rotation_errors.size(); ++n) {
    out << "rotation_error_deg," << n << ","
        << rad_to_deg(metrics.rotation_errors[n]) << "\n";
  }
  out << "marker_rms_m,," << metrics.marker_rms << "\n";
  out << "reprojection_rms_px,,";
  if (std::isfinite(metrics.reprojection_rms)) out << metrics.reprojection_rms;
  out << "\n";
  out << "wand_length_std_m,," << metrics.length_std << "\n";
  return out.str();
}

}  // namespace detail

/// Gauge-aligns the estimate onto the truth and prints a metrics table;
/// the same numbers land in <out>/metrics.csv.
inline int cmd_evaluate(const EvaluateOptions& opt) {
  const io::ResultsFile results =
      io::results_from_json(io::read_json_file(opt.results_path), "$");
  const io::TruthFile truth =
      io::truth_from_json(io::read_json_file(opt.truth_path), "$");
  const EvalMetrics metrics =
      evaluate_state(results.result.state, truth.state, truth.intrinsics);

  std::cout << "camera  center error (m)  rotation error (deg)\n";
  for (std::size_t n = 0; n < metrics.center_errors.size(); ++n) {
    std::cout << std::setw(6) << n << "  " << std::setw(16)
              << metrics.center_errors[n] << "  " << std::setw(20)
              << rad_to_deg(metrics.rotation_errors[n]) << "\n";
  }
  std::cout << "marker RMS (m):         " << metrics.marker_rms << "\n"
            << "reprojection RMS (px):  " << metrics.reprojection_rms << "\n"
            << "wand length std (m):    " << metrics.length_std << "\n";
  if (metrics.behind_pairs > 0) {
    std::cout << "warning: " << metrics.behind_pairs
              << " truth-visible pairs fall behind the estimated cameras\n";
  }

  detail::ensure_dir(opt.out_dir);
  const std::string csv_path = detail::joined(opt.out_dir, "metrics.csv");
  io::write_text_file(csv_path, detail::metrics_csv(metrics));
  std::cout << "wrote " << csv_path << "\n";
  return kExitOk;
}

// --- lp-selftest -----------------------------------------------------------------

/// Solver-vs-oracle sweep; any disagreement is an internal defect (exit 4).
inline int cmd_lp_selftest(int instances, std::uint64_t seed) {
  const lp::LpSelftestReport report = lp::run_lp_selftest(instances, seed);
  std::cout << "instances:                 " << report.instances << " ("
            << report.feasible << " feasible, " << report.infeasible
            << " infeasible)\n"
            << "max objective deviation:   " << report.max_objective_deviation
            << "\n"
            << "max feasibility violation: "
            << report.max_feasibility_violation << "\n";
  for (const std::string& line : report.failures) {
    std::cout << "FAIL " << line << "\n";
  }
  std::cout << (report.passed() ? "lp-selftest passed\n"
                                : "lp-selftest FAILED\n");
  return report.passed() ? kExitOk : kExitInternal;
}

// --- dispatcher ------------------------------------------------------------------

inline int run(int argc, char** argv) {
  CLI::App app{"wand-based multi-camera calibration toolkit"};
  app.require_subcommand(1);

  SimulateOptions sim;
  CLI::App* sim_cmd =
      app.add_subcommand("simulate", "generate a synthetic dataset");
  sim_cmd->add_option("--cameras", sim.spec.num_cameras, "number of cameras")
      ->capture_default_str();
  sim_cmd->add_option("--frames", sim.spec.num_frames, "wand placements M'")
      ->capture_default_str();
  sim_cmd->add_option("--noise", sim.spec.pixel_noise, "pixel noise sigma")
      ->capture_default_str();
  sim_cmd
      ->add_option("--dropout", sim.spec.dropout,
                   "per-observation dropout probability")
      ->capture_default_str();
  sim_cmd
      ->add_option("--wand-length", sim.spec.wand_length,
                   "marker separation d, meters")
      ->capture_default_str();
  sim_cmd->add_option("--m-cal", sim.spec.m_cal,
                      "markers constrained to the low-start zone")
      ->capture_default_str();
  sim_cmd->add_option("--seed", sim.spec.seed, "RNG seed")
      ->capture_default_str();
  sim_cmd->add_option("--out", sim.out_dir, "output directory")
      ->capture_default_str();

  CalibrateOptions cal;
  CLI::App* cal_cmd =
      app.add_subcommand("calibrate", "refine poses and markers");
  cal_cmd->add_option("dataset", cal.dataset_path, "dataset JSON file")
      ->required();
  cal_cmd->add_option("--config", cal.config_path, "run-config JSON file");
  cal_cmd->add_option("--init", cal.init_path,
                      "initial state file (otherwise the embedded truth is "
                      "perturbed)");
  cal_cmd->add_option("--out", cal.out_dir, "output directory")
      ->capture_default_str();
  cal_cmd->add_option("--seed", cal.flags.seed, "perturbation RNG seed");
  cal_cmd->add_option("--m-cal", cal.flags.m_cal,
                      "markers with anti-collapse rows (default 200)");
  cal_cmd->add_option("--bound", cal.flags.bound,
                      "LP variable bound, meters (default 10)");
  cal_cmd->add_option("--max-iters", cal.flags.max_iters,
                      "outer iteration cap");
  cal_cmd->add_option("--tol", cal.flags.tol, "relative E decrease to stop");
  cal_cmd->add_option("--trust-radius", cal.flags.trust_radius,
                      "largest per-coordinate LP move, meters");
  cal_cmd->add_option("--perturb-angles", cal.flags.perturb_angles_deg,
                      "init perturbation, degrees (default 5)");
  cal_cmd->add_option("--perturb-translations",
                      cal.flags.perturb_translations,
                      "init perturbation, meters (default 0.2)");
  cal_cmd->add_option("--perturb-markers", cal.flags.perturb_markers,
                      "init perturbation, meters (default 0.1)");

  EvaluateOptions eval;
  CLI::App* eval_cmd =
      app.add_subcommand("evaluate", "compare results against ground truth");
  eval_cmd->add_option("results", eval.results_path, "results JSON file")
      ->required();
  eval_cmd->add_option("truth", eval.truth_path, "truth JSON file")
      ->required();
  eval_cmd->add_option("--out", eval.out_dir, "output directory")
      ->capture_default_str();

  int selftest_instances = 200;
  std::uint64_t selftest_seed = 223;
  CLI::App* selftest_cmd = app.add_subcommand(
      "lp-selftest", "check the LP solver against the enumeration oracle");
  selftest_cmd
      ->add_option("--instances", selftest_instances, "number of random LPs")
      ->capture_default_str();
  selftest_cmd->add_option("--seed", selftest_seed, "RNG seed")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    // --help lands here with exit code 0; real flag errors map to bad input.
    const int code = app.exit(err);
    return code == 0 ? kExitOk : kExitBadInput;
  }

  try {
    if (app.got_subcommand(sim_cmd)) return cmd_simulate(sim);
    if (app.got_subcommand(cal_cmd)) return cmd_calibrate(cal);
    if (app.got_subcommand(eval_cmd)) return cmd_evaluate(eval);
    if (app.got_subcommand(selftest_cmd)) {
      return cmd_lp_selftest(selftest_instances, selftest_seed);
    }
    std::cerr << "error: no subcommand\n";
    return kExitBadInput;
  } catch (const SchemaError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitBadInput;
  } catch (const InvalidArgumentError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitBadInput;
  } catch (const InsufficientObservationsError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitBadInput;
  } catch (const DegenerateGeometryError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitBadInput;
  } catch (const BehindCameraError& err) {
    std::cerr << "numerical failure: " << err.what() << "\n";
    return kExitNumerical;
  } catch (const NumericError& err) {
    std::cerr << "numerical failure: " << err.what() << "\n";
    return kExitNumerical;
  } catch (const InternalError& err) {
    std::cerr << "internal error: " << err.what() << "\n";
    return kExitInternal;
  } catch (const Error& err) {
    std::cerr << "internal error: " << err.what() << "\n";
    return kExitInternal;
  } catch (const std::exception& err) {
    std::cerr << "internal error: " << err.what() << "\n";
    return kExitInternal;
  }
}

}  // namespace wandcal::cli
