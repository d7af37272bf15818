#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rtscal/calibrate.hpp"
#include "rtscal/errors.hpp"
#include "rtscal/io.hpp"
#include "rtscal/preprocess.hpp"
#include "rtscal/simulate.hpp"

namespace rtscal {

// ---------------------------------------------------------------------------
// Typed access over a KeyValueDoc with defaults
// ---------------------------------------------------------------------------

namespace detail {

class ConfigReader {
 public:
  explicit ConfigReader(const KeyValueDoc& doc) : doc_(doc) {}

  double number(const std::string& key, double fallback) {
    const std::string* v = doc_.find("", key);
    if (v == nullptr) return record(key, fallback);
    double out = 0.0;
    if (!parse_double(*v, out))
      throw ConfigError("config: '" + key + "' is not a number");
    return record(key, out);
  }

  bool flag(const std::string& key, bool fallback) {
    const std::string* v = doc_.find("", key);
    bool out = fallback;
    if (v != nullptr) {
      if (*v == "true" || *v == "1")
        out = true;
      else if (*v == "false" || *v == "0")
        out = false;
      else
        throw ConfigError("config: '" + key + "' must be true or false");
    }
    snapshot_.emplace_back(key, out ? "true" : "false");
    return out;
  }

  std::string text(const std::string& key, const std::string& fallback) {
    const std::string* v = doc_.find("", key);
    const std::string out = v != nullptr ? *v : fallback;
    snapshot_.emplace_back(key, out);
    return out;
  }

  Eigen::Vector3d vec3(const std::string& key, const Eigen::Vector3d& fallback) {
    const std::string* v = doc_.find("", key);
    Eigen::Vector3d out = fallback;
    if (v != nullptr) {
      const std::vector<double> nums = parse_double_list(*v, key);
      if (nums.size() != 3)
        throw ConfigError("config: '" + key + "' needs 3 numbers");
      out = Eigen::Vector3d(nums[0], nums[1], nums[2]);
    }
    snapshot_.emplace_back(key, format_g17(out.x()) + " " +
                                    format_g17(out.y()) + " " +
                                    format_g17(out.z()));
    return out;
  }

  std::vector<std::string> repeated(const std::string& key) {
    const std::vector<std::string> vals = doc_.all("", key);
    for (const auto& v : vals) snapshot_.emplace_back(key, v);
    return vals;
  }

  [[nodiscard]] std::vector<std::pair<std::string, std::string>> snapshot()
      const {
    return snapshot_;
  }

 private:
  double record(const std::string& key, double value) {
    snapshot_.emplace_back(key, format_g17(value));
    return value;
  }

  const KeyValueDoc& doc_;
  std::vector<std::pair<std::string, std::string>> snapshot_;
};

}  // namespace detail

/// Replace (or append) a top-level key; CLI flags override file values.
inline void apply_override(KeyValueDoc& doc, const std::string& key,
                           const std::string& value) {
  for (auto& e : doc.entries) {
    if (e.section.empty() && e.key == key) {
      e.value = value;
      return;
    }
  }
  doc.entries.push_back({"", key, value});
}

// ---------------------------------------------------------------------------
// Pipeline + calibration configuration
// ---------------------------------------------------------------------------

/// Everything the preprocess/calibrate commands need, resolved from a
/// key=value file with CLI overrides already applied.  Angle thresholds are
/// degrees in files, radians in the structs.
struct ResolvedConfig {
  PipelineConfig pipeline;
  SearchOptions search;
  InterPrismOptions solver;
  double robot_speed_max_mps = 2.0;
  bool yaw_only = true;
  std::optional<double> reference_line_m;  ///< drawn in reports if present
  std::vector<std::pair<std::string, std::string>> snapshot;
};

inline ResolvedConfig load_calibration_config(const KeyValueDoc& doc) {
  detail::ConfigReader r(doc);
  ResolvedConfig out;

  out.pipeline.tau_r_mps = r.number("tau_r_mps", 2.0);
  out.pipeline.tau_e_radps = deg_to_rad(r.number("tau_e_deg_per_s", 1.0));
  out.pipeline.tau_a_radps = deg_to_rad(r.number("tau_a_deg_per_s", 1.0));
  out.pipeline.tau_s_s = r.number("tau_s_s", 1.0);
  out.pipeline.tau_l_s = r.number("tau_l_s", 6.0);
  const std::string interp = r.text("interpolation", "linear");
  if (interp == "linear")
    out.pipeline.interpolation = Interpolation::linear;
  else if (interp == "gaussian_process")
    out.pipeline.interpolation = Interpolation::gaussian_process;
  else
    throw ConfigError("config: interpolation must be linear|gaussian_process");
  out.pipeline.output_rate_hz = r.number("output_rate_hz", 10.0);
  out.pipeline.enable_outlier_filter = r.flag("enable_outlier_filter", true);
  out.pipeline.enable_interval_filter = r.flag("enable_interval_filter", true);
  out.pipeline.gp.length_scale_s = r.number("gp_length_scale_s", 1.0);
  out.pipeline.gp.sigma_m = r.number("gp_sigma_m", 1.0);
  out.pipeline.gp.noise_sigma_m = r.number("gp_noise_sigma_m", 0.002);
  out.pipeline.gp.max_condition = r.number("gp_max_condition", 1e12);
  out.pipeline.require_valid();

  out.search.tau_v_start_mps = r.number("tau_v_start_mps", 0.01);
  out.search.tau_v_step_mps = r.number("tau_v_step_mps", 0.10);
  out.search.validation_trans_m = r.number("validation_trans_m", 0.05);
  out.search.validation_rot_rad =
      deg_to_rad(r.number("validation_rot_deg", 0.5));
  out.search.min_similar =
      static_cast<int>(r.number("min_similar", 3));
  out.search.min_points =
      static_cast<std::size_t>(r.number("min_points", 10));

  out.solver.max_iterations =
      static_cast<int>(r.number("max_iterations", 200));
  out.robot_speed_max_mps =
      r.number("robot_speed_max_mps", out.pipeline.tau_r_mps);
  out.yaw_only = r.flag("yaw_only", true);
  const double ref = r.number("reference_line_m", 0.0);
  if (ref > 0.0) out.reference_line_m = ref;

  out.snapshot = r.snapshot();
  return out;
}

// ---------------------------------------------------------------------------
// Scene configuration
// ---------------------------------------------------------------------------

inline TrajectoryKind trajectory_kind_from(const std::string& name) {
  if (name == "figure_eight") return TrajectoryKind::figure_eight;
  if (name == "straight_line") return TrajectoryKind::straight_line;
  if (name == "l_shape") return TrajectoryKind::l_shape;
  if (name == "static") return TrajectoryKind::static_pose;
  if (name == "scripted") return TrajectoryKind::scripted;
  throw ConfigError("config: unknown trajectory '" + name + "'");
}

struct ResolvedScene {
  SceneConfig scene;
  std::vector<std::pair<std::string, std::string>> snapshot;
};

inline ResolvedScene load_scene_config(const KeyValueDoc& doc) {
  detail::ConfigReader r(doc);
  ResolvedScene out;
  SceneConfig& s = out.scene;

  s.world_from_station1 = RigidTransform::from_yaw(
      deg_to_rad(r.number("station1_yaw_deg", 0.0)),
      r.vec3("station1_xyz_m", Eigen::Vector3d::Zero()), station_frame(1),
      kWorldFrame);
  s.t_12 = RigidTransform::from_yaw(
      deg_to_rad(r.number("t12_yaw_deg", 25.0)),
      r.vec3("t12_xyz_m", Eigen::Vector3d(70.0, -20.0, 0.4)), station_frame(2),
      station_frame(1));
  s.t_13 = RigidTransform::from_yaw(
      deg_to_rad(r.number("t13_yaw_deg", -140.0)),
      r.vec3("t13_xyz_m", Eigen::Vector3d(-80.0, 30.0, -0.3)), station_frame(3),
      station_frame(1));

  // Prism rigs: the default spacing honours the >= 80 cm guidance; "hd2"
  // reproduces the much tighter rig that degraded the field results.
  const std::string preset = r.text("prism_preset", "warthog");
  double scale = 1.0;
  if (preset == "hd2")
    scale = 0.375;
  else if (preset != "warthog")
    throw ConfigError("config: prism_preset must be warthog|hd2");
  const SceneConfig defaults;
  for (int k = 0; k < 3; ++k)
    s.prism_offsets_body[static_cast<std::size_t>(k)] =
        r.vec3("prism" + std::to_string(k + 1) + "_offset_m",
               scale * defaults.prism_offsets_body[static_cast<std::size_t>(k)]);

  s.kind = trajectory_kind_from(r.text("trajectory", "figure_eight"));
  s.duration_s = r.number("duration_s", 120.0);
  s.speed_mps = r.number("speed_mps", 0.5);
  s.static_lead_s = r.number("static_lead_s", 5.0);
  s.accel_mps2 = r.number("accel_mps2", 0.25);
  s.path_center_world = r.vec3("path_center_m", Eigen::Vector3d(0.0, 90.0, 0.5));
  s.path_yaw_rad = deg_to_rad(r.number("path_yaw_deg", 0.0));
  s.figure_eight_half_length_m = r.number("figure_eight_half_length_m", 15.0);
  s.figure_eight_half_width_m = r.number("figure_eight_half_width_m", 8.0);
  s.l_leg_m = r.number("l_leg_m", 0.0);
  s.turn_radius_m = r.number("turn_radius_m", 1.5);
  s.rate_hz = r.number("rate_hz", 2.5);
  s.range_noise_sigma_m = r.number("range_noise_sigma_m", 0.002);
  s.angle_noise_sigma_rad =
      deg_to_rad(r.number("angle_noise_sigma_arcsec", 1.0) / 3600.0);
  s.outlier_rate = r.number("outlier_rate", 0.0);
  s.shared_prism = r.flag("shared_prism", false);
  s.synchronized_sampling = r.flag("synchronized_sampling", false);
  s.gcp_shots = static_cast<int>(r.number("gcp_shots", 1));
  s.seed = static_cast<std::uint64_t>(r.number("seed", 0.0));

  for (const std::string& d : r.repeated("dropout")) {
    const std::vector<double> nums = detail::parse_double_list(d, "dropout");
    if (nums.size() != 3)
      throw ConfigError("config: dropout needs 'station start_s end_s'");
    s.dropouts.push_back(
        {static_cast<int>(nums[0]), nums[1], nums[2]});
  }
  for (const std::string& w : r.repeated("waypoint")) {
    const std::vector<double> nums = detail::parse_double_list(w, "waypoint");
    if (nums.size() != 3)
      throw ConfigError("config: waypoint needs 'x y z'");
    s.waypoints.emplace_back(nums[0], nums[1], nums[2]);
  }
  for (const std::string& g : r.repeated("gcp")) {
    std::istringstream iss(g);
    std::string label;
    double x = 0.0, y = 0.0, z = 0.0;
    if (!(iss >> label >> x >> y >> z))
      throw ConfigError("config: gcp needs 'label x y z'");
    s.gcps_world.push_back({label, Eigen::Vector3d(x, y, z)});
  }

  s.require_valid();
  out.snapshot = r.snapshot();
  return out;
}

}  // namespace rtscal
