#pragma once

// File formats: JSON for datasets, results, scene states and run configs,
// CSV for the per-iteration trace. Parsing is strict — every object is
// checked against its schema and an unknown or missing key raises
// SchemaError naming the JSON path (e.g. "$.intrinsics[1]"), so a typo in
// a config fails fast instead of silently running with defaults. Numbers
// pass through the serializer's shortest-round-trip encoding, so a
// write-then-read of any file reproduces the doubles bit for bit.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "wandcal/observations.hpp"
#include "wandcal/refine.hpp"
#include "wandcal/simulate.hpp"
#include "wandcal/state.hpp"

#include "json.hpp"

namespace wandcal::io {

using json = nlohmann::json;

inline constexpr int kFormatVersion = 1;

namespace detail {

inline std::string element(const std::string& path, std::size_t index) {
  return path + "[" + std::to_string(index) + "]";
}

inline std::string member(const std::string& path, const std::string& key) {
  return path + "." + key;
}

inline void require_object(const json& j, const std::string& path) {
  if (!j.is_object()) {
    throw SchemaError(path + ": expected an object, got " +
                      std::string(j.type_name()));
  }
}

/// Strict-schema guard: every key present must be in `allowed`.
inline void reject_unknown_keys(const json& j,
                                std::initializer_list<const char*> allowed,
                                const std::string& path) {
  require_object(j, path);
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* key : allowed) {
      if (item.key() == key) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw SchemaError(member(path, item.key()) + ": unknown key");
    }
  }
}

inline const json& require_key(const json& j, const char* key,
                               const std::string& path) {
  require_object(j, path);
  const auto it = j.find(key);
  if (it == j.end()) {
    throw SchemaError(member(path, key) + ": missing");
  }
  return *it;
}

inline double as_double(const json& j, const std::string& path) {
  if (!j.is_number()) {
    throw SchemaError(path + ": expected a number, got " +
                      std::string(j.type_name()));
  }
  return j.get<double>();
}

/// Like as_double but null maps to NaN — used for metrics that can be
/// unavailable (JSON has no NaN literal, so NaN serializes as null).
inline double as_double_or_nan(const json& j, const std::string& path) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  return as_double(j, path);
}

inline std::int64_t as_int(const json& j, const std::string& path) {
  if (!j.is_number_integer()) {
    throw SchemaError(path + ": expected an integer, got " +
                      std::string(j.type_name()));
  }
  return j.get<std::int64_t>();
}

inline bool as_bool(const json& j, const std::string& path) {
  if (!j.is_boolean()) {
    throw SchemaError(path + ": expected a boolean, got " +
                      std::string(j.type_name()));
  }
  return j.get<bool>();
}

inline std::string as_string(const json& j, const std::string& path) {
  if (!j.is_string()) {
    throw SchemaError(path + ": expected a string, got " +
                      std::string(j.type_name()));
  }
  return j.get<std::string>();
}

inline Eigen::Vector3d as_vec3(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3) {
    throw SchemaError(path + ": expected an array of 3 numbers");
  }
  Eigen::Vector3d out;
  for (std::size_t k = 0; k < 3; ++k) {
    out[static_cast<int>(k)] = as_double(j[k], element(path, k));
  }
  return out;
}

inline json vec3_to_json(const Eigen::Vector3d& v) {
  return json::array({v.x(), v.y(), v.z()});
}

inline void check_version(const json& j, const std::string& path) {
  const std::int64_t version =
      as_int(require_key(j, "version", path), member(path, "version"));
  if (version != kFormatVersion) {
    throw SchemaError(member(path, "version") + ": unsupported version " +
                      std::to_string(version) + " (expected " +
                      std::to_string(kFormatVersion) + ")");
  }
}

}  // namespace detail

/// Parses a whole file, attributing syntax errors to the file path.
inline json read_json_file(const std::string& file_path) {
  std::ifstream in(file_path);
  if (!in) {
    throw SchemaError(file_path + ": cannot open for reading");
  }
  try {
    return json::parse(in);
  } catch (const json::parse_error& err) {
    throw SchemaError(file_path + ": " + err.what());
  }
}

inline void write_json_file(const std::string& file_path, const json& j) {
  std::ofstream out(file_path);
  if (!out) {
    throw SchemaError(file_path + ": cannot open for writing");
  }
  out << j.dump(2) << "\n";
  if (!out) {
    throw SchemaError(file_path + ": write failed");
  }
}

// --- scene state -----------------------------------------------------------

inline json state_to_json(const SceneState& state) {
  json poses = json::array();
  for (const auto& pose : state.poses) {
    poses.push_back(
        {{"angles", json::array({pose.angles.phi_x, pose.angles.phi_y,
                                 pose.angles.phi_z})},
         {"t_prime", detail::vec3_to_json(pose.t_prime)}});
  }
  json markers = json::array();
  for (const auto& marker : state.markers) {
    markers.push_back(detail::vec3_to_json(marker));
  }
  return {{"poses", std::move(poses)}, {"markers", std::move(markers)}};
}

inline SceneState state_from_json(const json& j, const std::string& path) {
  detail::reject_unknown_keys(j, {"poses", "markers"}, path);
  SceneState state;
  const json& poses = detail::require_key(j, "poses", path);
  const std::string poses_path = detail::member(path, "poses");
  if (!poses.is_array()) {
    throw SchemaError(poses_path + ": expected an array");
  }
  for (std::size_t n = 0; n < poses.size(); ++n) {
    const std::string pose_path = detail::element(poses_path, n);
    detail::reject_unknown_keys(poses[n], {"angles", "t_prime"}, pose_path);
    const Eigen::Vector3d angles =
        detail::as_vec3(detail::require_key(poses[n], "angles", pose_path),
                        detail::member(pose_path, "angles"));
    CameraPose pose;
    pose.angles = {angles.x(), angles.y(), angles.z()};
    pose.t_prime =
        detail::as_vec3(detail::require_key(poses[n], "t_prime", pose_path),
                        detail::member(pose_path, "t_prime"));
    state.poses.push_back(pose);
  }
  const json& markers = detail::require_key(j, "markers", path);
  const std::string markers_path = detail::member(path, "markers");
  if (!markers.is_array()) {
    throw SchemaError(markers_path + ": expected an array");
  }
  for (std::size_t m = 0; m < markers.size(); ++m) {
    state.markers.push_back(
        detail::as_vec3(markers[m], detail::element(markers_path, m)));
  }
  return state;
}

// --- intrinsics ------------------------------------------------------------

inline json intrinsics_to_json(const std::vector<CameraIntrinsics>& ks) {
  json out = json::array();
  for (const auto& k : ks) {
    out.push_back({{"f", k.f},
                   {"alpha", k.alpha},
                   {"beta", k.beta},
                   {"gamma", k.gamma}});
  }
  return out;
}

inline std::vector<CameraIntrinsics> intrinsics_from_json(
    const json& j, const std::string& path) {
  if (!j.is_array()) {
    throw SchemaError(path + ": expected an array");
  }
  std::vector<CameraIntrinsics> out;
  for (std::size_t n = 0; n < j.size(); ++n) {
    const std::string k_path = detail::element(path, n);
    detail::reject_unknown_keys(j[n], {"f", "alpha", "beta", "gamma"}, k_path);
    CameraIntrinsics k;
    k.f = detail::as_double(detail::require_key(j[n], "f", k_path),
                            detail::member(k_path, "f"));
    k.alpha = detail::as_double(detail::require_key(j[n], "alpha", k_path),
                                detail::member(k_path, "alpha"));
    k.beta = detail::as_double(detail::require_key(j[n], "beta", k_path),
                               detail::member(k_path, "beta"));
    k.gamma = detail::as_double(detail::require_key(j[n], "gamma", k_path),
                                detail::member(k_path, "gamma"));
    k.validate();
    out.push_back(k);
  }
  return out;
}

// --- dataset ---------------------------------------------------------------

struct Dataset {
  ObservationSet obs;
  std::vector<CameraIntrinsics> intrinsics;
  std::optional<SceneState> truth;
};

inline json dataset_to_json(const ObservationSet& obs,
                            const std::vector<CameraIntrinsics>& intrinsics,
                            const SceneState* truth = nullptr) {
  json pairs = json::array();
  for (int frame = 0; frame < obs.num_frames(); ++frame) {
    pairs.push_back(json::array({2 * frame, 2 * frame + 1}));
  }
  json observations = json::array();
  for (int m = 0; m < obs.num_markers; ++m) {
    for (int n = 0; n < obs.num_cameras; ++n) {
      if (!obs.visible(m, n)) continue;
      const PixelPoint& fp = obs.fp(m, n);
      observations.push_back({{"marker_index", m},
                              {"camera_index", n},
                              {"u", fp.x()},
                              {"v", fp.y()}});
    }
  }
  json out = {{"version", kFormatVersion},
              {"wand_length", obs.wand_length},
              {"num_cameras", obs.num_cameras},
              {"num_markers", obs.num_markers},
              {"wand_pairs", std::move(pairs)},
              {"intrinsics", intrinsics_to_json(intrinsics)},
              {"observations", std::move(observations)}};
  if (truth != nullptr) {
    out["truth"] = state_to_json(*truth);
  }
  return out;
}

inline Dataset dataset_from_json(const json& j, const std::string& path) {
  detail::reject_unknown_keys(
      j,
      {"version", "wand_length", "num_cameras", "num_markers", "wand_pairs",
       "intrinsics", "observations", "truth"},
      path);
  detail::check_version(j, path);

  const std::int64_t num_cameras =
      detail::as_int(detail::require_key(j, "num_cameras", path),
                     detail::member(path, "num_cameras"));
  const std::int64_t num_markers =
      detail::as_int(detail::require_key(j, "num_markers", path),
                     detail::member(path, "num_markers"));
  if (num_cameras < 2 || num_markers < 2 || num_markers % 2 != 0) {
    throw SchemaError(path +
                      ": num_cameras must be >= 2 and num_markers a positive "
                      "even count");
  }
  const double wand_length =
      detail::as_double(detail::require_key(j, "wand_length", path),
                        detail::member(path, "wand_length"));

  Dataset out;
  out.obs = ObservationSet(static_cast<int>(num_markers),
                           static_cast<int>(num_cameras), wand_length);

  // The library pairs markers (2i, 2i+1); any other pairing is unsupported,
  // so the file must spell out exactly that convention.
  const json& pairs = detail::require_key(j, "wand_pairs", path);
  const std::string pairs_path = detail::member(path, "wand_pairs");
  if (!pairs.is_array() ||
      pairs.size() != static_cast<std::size_t>(num_markers / 2)) {
    throw SchemaError(pairs_path + ": expected " +
                      std::to_string(num_markers / 2) + " marker pairs");
  }
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const std::string pair_path = detail::element(pairs_path, i);
    if (!pairs[i].is_array() || pairs[i].size() != 2 ||
        detail::as_int(pairs[i][0], detail::element(pair_path, 0)) !=
            static_cast<std::int64_t>(2 * i) ||
        detail::as_int(pairs[i][1], detail::element(pair_path, 1)) !=
            static_cast<std::int64_t>(2 * i + 1)) {
      throw SchemaError(pair_path + ": unsupported pairing, expected [" +
                        std::to_string(2 * i) + ", " +
                        std::to_string(2 * i + 1) + "]");
    }
  }

  out.intrinsics =
      intrinsics_from_json(detail::require_key(j, "intrinsics", path),
                           detail::member(path, "intrinsics"));
  if (static_cast<std::int64_t>(out.intrinsics.size()) != num_cameras) {
    throw SchemaError(detail::member(path, "intrinsics") + ": expected " +
                      std::to_string(num_cameras) + " entries, got " +
                      std::to_string(out.intrinsics.size()));
  }

  const json& observations = detail::require_key(j, "observations", path);
  const std::string obs_path = detail::member(path, "observations");
  if (!observations.is_array()) {
    throw SchemaError(obs_path + ": expected an array");
  }
  for (std::size_t i = 0; i < observations.size(); ++i) {
    const std::string entry_path = detail::element(obs_path, i);
    detail::reject_unknown_keys(
        observations[i], {"marker_index", "camera_index", "u", "v"},
        entry_path);
    const std::int64_t m = detail::as_int(
        detail::require_key(observations[i], "marker_index", entry_path),
        detail::member(entry_path, "marker_index"));
    const std::int64_t n = detail::as_int(
        detail::require_key(observations[i], "camera_index", entry_path),
        detail::member(entry_path, "camera_index"));
    if (m < 0 || m >= num_markers || n < 0 || n >= num_cameras) {
      throw SchemaError(entry_path + ": marker/camera index out of range");
    }
    if (out.obs.visible(static_cast<int>(m), static_cast<int>(n))) {
      throw SchemaError(entry_path + ": duplicate observation");
    }
    const double u =
        detail::as_double(detail::require_key(observations[i], "u", entry_path),
                          detail::member(entry_path, "u"));
    const double v =
        detail::as_double(detail::require_key(observations[i], "v", entry_path),
                          detail::member(entry_path, "v"));
    out.obs.set(static_cast<int>(m), static_cast<int>(n), PixelPoint(u, v));
  }
  out.obs.validate();

  if (j.contains("truth")) {
    out.truth = state_from_json(j["truth"], detail::member(path, "truth"));
    if (static_cast<std::int64_t>(out.truth->num_cameras()) != num_cameras ||
        static_cast<std::int64_t>(out.truth->num_markers()) != num_markers) {
      throw SchemaError(detail::member(path, "truth") +
                        ": size does not match the dataset");
    }
  }
  return out;
}

// --- standalone truth / state file ------------------------------------------

inline json truth_to_json(const GroundTruth& truth, double wand_length) {
  json out = state_to_json(truth.state());
  out["version"] = kFormatVersion;
  out["wand_length"] = wand_length;
  out["intrinsics"] = intrinsics_to_json(truth.intrinsics);
  return out;
}

struct TruthFile {
  SceneState state;
  std::vector<CameraIntrinsics> intrinsics;
  double wand_length = 0.0;
};

inline TruthFile truth_from_json(const json& j, const std::string& path) {
  detail::reject_unknown_keys(
      j, {"version", "wand_length", "intrinsics", "poses", "markers"}, path);
  detail::check_version(j, path);
  TruthFile out;
  out.wand_length =
      detail::as_double(detail::require_key(j, "wand_length", path),
                        detail::member(path, "wand_length"));
  out.intrinsics =
      intrinsics_from_json(detail::require_key(j, "intrinsics", path),
                           detail::member(path, "intrinsics"));
  json state_only = {{"poses", detail::require_key(j, "poses", path)},
                     {"markers", detail::require_key(j, "markers", path)}};
  out.state = state_from_json(state_only, path);
  if (out.state.poses.size() != out.intrinsics.size()) {
    throw SchemaError(path + ": pose and intrinsics counts differ");
  }
  return out;
}

// --- refine results ----------------------------------------------------------

namespace detail {

inline json finite_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

inline RefineStop stop_from_string(const std::string& name,
                                   const std::string& path) {
  for (RefineStop stop :
       {RefineStop::Converged, RefineStop::IterationLimit,
        RefineStop::LaeLseDivergence, RefineStop::LpFailure}) {
    if (name == to_string(stop)) return stop;
  }
  throw SchemaError(path + ": unknown stop reason \"" + name + "\"");
}

}  // namespace detail

/// Wall-clock timings are deliberately left out: with them the results file
/// would differ between identical reruns. They stay in the iteration CSV,
/// which is plot data rather than the calibration record.
inline json results_to_json(const RefineResult& result, double wand_length) {
  json iterations = json::array();
  for (const auto& row : result.report.iterations) {
    iterations.push_back({{"iteration", row.iteration},
                          {"e", row.e},
                          {"lae", row.lae},
                          {"p", detail::finite_or_null(row.p)},
                          {"length_std", row.length_std}});
  }
  json out = state_to_json(result.state);
  out["version"] = kFormatVersion;
  out["wand_length"] = wand_length;
  out["report"] = {{"initial_e", result.report.initial_e},
                   {"final_e", result.report.final_e},
                   {"scale", result.report.scale},
                   {"stop", to_string(result.report.stop)},
                   {"message", result.report.message},
                   {"iterations", std::move(iterations)}};
  return out;
}

struct ResultsFile {
  RefineResult result;
  double wand_length = 0.0;
};

inline ResultsFile results_from_json(const json& j, const std::string& path) {
  detail::reject_unknown_keys(
      j, {"version", "wand_length", "poses", "markers", "report"}, path);
  detail::check_version(j, path);
  ResultsFile out;
  out.wand_length =
      detail::as_double(detail::require_key(j, "wand_length", path),
                        detail::member(path, "wand_length"));
  json state_only = {{"poses", detail::require_key(j, "poses", path)},
                     {"markers", detail::require_key(j, "markers", path)}};
  out.result.state = state_from_json(state_only, path);

  const json& report = detail::require_key(j, "report", path);
  const std::string report_path = detail::member(path, "report");
  detail::reject_unknown_keys(
      report, {"initial_e", "final_e", "scale", "stop", "message",
               "iterations"},
      report_path);
  RefineReport& r = out.result.report;
  r.initial_e =
      detail::as_double(detail::require_key(report, "initial_e", report_path),
                        detail::member(report_path, "initial_e"));
  r.final_e =
      detail::as_double(detail::require_key(report, "final_e", report_path),
                        detail::member(report_path, "final_e"));
  r.scale = detail::as_double(detail::require_key(report, "scale", report_path),
                              detail::member(report_path, "scale"));
  r.stop = detail::stop_from_string(
      detail::as_string(detail::require_key(report, "stop", report_path),
                        detail::member(report_path, "stop")),
      detail::member(report_path, "stop"));
  r.message =
      detail::as_string(detail::require_key(report, "message", report_path),
                        detail::member(report_path, "message"));

  const json& iterations =
      detail::require_key(report, "iterations", report_path);
  const std::string iters_path = detail::member(report_path, "iterations");
  if (!iterations.is_array()) {
    throw SchemaError(iters_path + ": expected an array");
  }
  for (std::size_t i = 0; i < iterations.size(); ++i) {
    const std::string row_path = detail::element(iters_path, i);
    detail::reject_unknown_keys(
        iterations[i], {"iteration", "e", "lae", "p", "length_std"}, row_path);
    RefineIteration row;
    row.iteration = static_cast<int>(detail::as_int(
        detail::require_key(iterations[i], "iteration", row_path),
        detail::member(row_path, "iteration")));
    row.e = detail::as_double(detail::require_key(iterations[i], "e", row_path),
                              detail::member(row_path, "e"));
    row.lae =
        detail::as_double(detail::require_key(iterations[i], "lae", row_path),
                          detail::member(row_path, "lae"));
    row.p = detail::as_double_or_nan(
        detail::require_key(iterations[i], "p", row_path),
        detail::member(row_path, "p"));
    row.length_std = detail::as_double(
        detail::require_key(iterations[i], "length_std", row_path),
        detail::member(row_path, "length_std"));
    r.iterations.push_back(row);
  }
  return out;
}

// --- per-iteration CSV -------------------------------------------------------

/// One row per outer iteration, matching the report fields. NaN (e.g. an
/// unavailable P) is written as an empty cell.
inline std::string iterations_csv(const std::vector<RefineIteration>& rows) {
  std::ostringstream out;
  out.precision(17);
  out << "iteration,E,LAE,P,length_std,ms_angles,ms_lp\n";
  for (const auto& row : rows) {
    out << row.iteration << "," << row.e << "," << row.lae << ",";
    if (std::isfinite(row.p)) out << row.p;
    out << "," << row.length_std << "," << row.ms_angles << "," << row.ms_lp
        << "\n";
  }
  return out.str();
}

inline void write_text_file(const std::string& file_path,
                            const std::string& text) {
  std::ofstream out(file_path);
  if (!out) {
    throw SchemaError(file_path + ": cannot open for writing");
  }
  out << text;
  if (!out) {
    throw SchemaError(file_path + ": write failed");
  }
}

// --- run config --------------------------------------------------------------

/// Everything `calibrate` needs beyond the dataset: the refine settings,
/// the perturbed-truth initializer magnitudes, and the seed. Flags overlay
/// individual fields after the file is read.
struct RunConfig {
  RefineConfig refine;
  std::uint64_t seed = 7;
  PerturbMagnitudes perturb{deg_to_rad(5.0), 0.2, 0.1};
};

inline RunConfig run_config_from_json(const json& j, const std::string& path) {
  detail::reject_unknown_keys(
      j,
      {"max_iterations", "rel_tol", "trust_radius", "m_cal", "bound", "margin",
       "anti_collapse", "scale_estimator", "parallel_angles", "seed",
       "perturb"},
      path);
  RunConfig out;
  if (j.contains("max_iterations")) {
    out.refine.max_iterations = static_cast<int>(detail::as_int(
        j["max_iterations"], detail::member(path, "max_iterations")));
  }
  if (j.contains("rel_tol")) {
    out.refine.rel_tol =
        detail::as_double(j["rel_tol"], detail::member(path, "rel_tol"));
  }
  if (j.contains("trust_radius")) {
    out.refine.trust_radius = detail::as_double(
        j["trust_radius"], detail::member(path, "trust_radius"));
  }
  if (j.contains("m_cal")) {
    out.refine.subproblem.m_cal = static_cast<int>(
        detail::as_int(j["m_cal"], detail::member(path, "m_cal")));
  }
  if (j.contains("bound")) {
    out.refine.subproblem.bound =
        detail::as_double(j["bound"], detail::member(path, "bound"));
  }
  if (j.contains("margin")) {
    out.refine.subproblem.margin =
        detail::as_double(j["margin"], detail::member(path, "margin"));
  }
  if (j.contains("anti_collapse")) {
    const std::string mode_path = detail::member(path, "anti_collapse");
    const std::string mode = detail::as_string(j["anti_collapse"], mode_path);
    if (mode == "linear-translation") {
      out.refine.subproblem.anti_collapse =
          lp::AntiCollapseMode::LinearTranslation;
    } else if (mode == "frozen-center") {
      out.refine.subproblem.anti_collapse = lp::AntiCollapseMode::FrozenCenter;
    } else {
      throw SchemaError(mode_path + ": expected \"linear-translation\" or "
                                    "\"frozen-center\", got \"" +
                        mode + "\"");
    }
  }
  if (j.contains("scale_estimator")) {
    const std::string est_path = detail::member(path, "scale_estimator");
    const std::string estimator = detail::as_string(j["scale_estimator"],
                                                    est_path);
    if (estimator == "mean") {
      out.refine.scale_estimator = ScaleEstimator::Mean;
    } else if (estimator == "median") {
      out.refine.scale_estimator = ScaleEstimator::Median;
    } else {
      throw SchemaError(est_path + ": expected \"mean\" or \"median\", got \"" +
                        estimator + "\"");
    }
  }
  if (j.contains("parallel_angles")) {
    out.refine.parallel_angles = detail::as_bool(
        j["parallel_angles"], detail::member(path, "parallel_angles"));
  }
  if (j.contains("seed")) {
    const std::string seed_path = detail::member(path, "seed");
    const std::int64_t seed = detail::as_int(j["seed"], seed_path);
    if (seed < 0) throw SchemaError(seed_path + ": seed must be non-negative");
    out.seed = static_cast<std::uint64_t>(seed);
  }
  if (j.contains("perturb")) {
    const std::string perturb_path = detail::member(path, "perturb");
    const json& perturb = j["perturb"];
    detail::reject_unknown_keys(
        perturb, {"angles_deg", "translations_m", "markers_m"}, perturb_path);
    if (perturb.contains("angles_deg")) {
      out.perturb.angles_rad = deg_to_rad(detail::as_double(
          perturb["angles_deg"], detail::member(perturb_path, "angles_deg")));
    }
    if (perturb.contains("translations_m")) {
      out.perturb.translations_m =
          detail::as_double(perturb["translations_m"],
                            detail::member(perturb_path, "translations_m"));
    }
    if (perturb.contains("markers_m")) {
      out.perturb.markers_m = detail::as_double(
          perturb["markers_m"], detail::member(perturb_path, "markers_m"));
    }
  }
  return out;
}

}  // namespace wandcal::io
