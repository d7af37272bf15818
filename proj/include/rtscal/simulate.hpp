#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "rtscal/calibrate.hpp"
#include "rtscal/errors.hpp"
#include "rtscal/se3.hpp"
#include "rtscal/types.hpp"

namespace rtscal {

// ---------------------------------------------------------------------------
// Deterministic randomness
// ---------------------------------------------------------------------------

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace detail

/// One independent random stream.  Streams are derived from the scene seed
/// as splitmix64(seed XOR splitmix64(stream_id)), so per-station and
/// per-purpose streams never overlap and Monte-Carlo batches can run
/// concurrently.  Doubles are produced from raw engine output (53-bit
/// mantissa) and normals via Box-Muller; no library distributions, so the
/// byte stream is identical on every standard library.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t stream_id)
      : engine_(detail::splitmix64(seed ^ detail::splitmix64(stream_id))) {}

  /// Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal (Box-Muller, cosine branch).
  double normal() {
    const double u1 =
        (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;  // (0,1]
    const double u2 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

 private:
  std::mt19937_64 engine_;
};

// ---------------------------------------------------------------------------
// Scene description
// ---------------------------------------------------------------------------

enum class TrajectoryKind {
  figure_eight,
  straight_line,
  l_shape,
  static_pose,
  scripted
};

struct DropoutWindow {
  int station_id = 0;  ///< {1,2,3}
  double start_s = 0.0;
  double end_s = 0.0;
};

/// Synthetic scene: a rigid body carrying three prisms moves along a
/// parametric path; each leveled station tracks its assigned prism.
struct SceneConfig {
  RigidTransform world_from_station1 =
      RigidTransform::identity(station_frame(1), kWorldFrame);
  RigidTransform t_12 = RigidTransform::from_yaw(
      deg_to_rad(25.0), Eigen::Vector3d(70.0, -20.0, 0.4), station_frame(2),
      station_frame(1));
  RigidTransform t_13 = RigidTransform::from_yaw(
      deg_to_rad(-140.0), Eigen::Vector3d(-80.0, 30.0, -0.3), station_frame(3),
      station_frame(1));

  /// Prism positions in the body frame (x forward along the path).
  std::array<Eigen::Vector3d, 3> prism_offsets_body = {
      Eigen::Vector3d(0.45, 0.35, 0.30), Eigen::Vector3d(-0.45, 0.35, 0.55),
      Eigen::Vector3d(0.0, -0.50, 0.80)};

  TrajectoryKind kind = TrajectoryKind::figure_eight;
  std::vector<Eigen::Vector3d> waypoints;  ///< scripted paths only

  double duration_s = 120.0;
  double speed_mps = 0.5;
  double static_lead_s = 5.0;  ///< body at rest before it starts moving
  double accel_mps2 = 0.25;    ///< ramp to cruise speed (0 = instant)
  Eigen::Vector3d path_center_world = Eigen::Vector3d(0.0, 90.0, 0.5);
  double path_yaw_rad = 0.0;  ///< orientation of the track in the world
  double figure_eight_half_length_m = 15.0;
  double figure_eight_half_width_m = 8.0;
  double l_leg_m = 0.0;       ///< 0 = split the travelled path in half
  double turn_radius_m = 1.5;

  double rate_hz = 2.5;
  double range_noise_sigma_m = 0.002;
  double angle_noise_sigma_rad = 4.84813681109536e-6;  ///< 1 arcsecond
  std::vector<DropoutWindow> dropouts;
  /// Probability that a sample's angles are replaced by a 0.5-2 degree
  /// fault.  Faults are kept isolated (>= 2 samples apart, never the first
  /// sample of a log).
  double outlier_rate = 0.0;

  bool shared_prism = false;  ///< all stations track prism 1 (method C setups)
  /// Identical sampling phase on all stations (time-synchronized triggering)
  /// instead of the default independent phases.
  bool synchronized_sampling = false;

  std::vector<GcpObservation> gcps_world;  ///< static control points, if any
  int gcp_shots = 1;                       ///< averaged measurements per GCP

  std::uint64_t seed = 0;

  void require_valid() const {
    if (!(duration_s > 0.0 && rate_hz > 0.0))
      throw ConfigError("scene: duration and rate must be > 0");
    if (speed_mps < 0.0 || range_noise_sigma_m < 0.0 ||
        angle_noise_sigma_rad < 0.0)
      throw ConfigError("scene: speeds and noise levels must be >= 0");
    if (kind != TrajectoryKind::static_pose && speed_mps <= 0.0)
      throw ConfigError("scene: moving trajectories need speed > 0");
    if (outlier_rate < 0.0 || outlier_rate >= 1.0)
      throw ConfigError("scene: outlier_rate must be in [0, 1)");
    if (kind == TrajectoryKind::scripted && waypoints.size() < 2)
      throw ConfigError("scene: scripted paths need >= 2 waypoints");
    const Eigen::Vector3d cross =
        (prism_offsets_body[1] - prism_offsets_body[0])
            .cross(prism_offsets_body[2] - prism_offsets_body[0]);
    if (cross.norm() < 1e-9)
      throw ConfigError("scene: prism offsets must be non-collinear");
    if (!world_from_station1.yaw_only() || !t_12.yaw_only() ||
        !t_13.yaw_only())
      throw ConfigError("scene: station poses must be yaw-only (leveled)");
    for (const auto& d : dropouts)
      if (d.station_id < 1 || d.station_id > 3 || d.end_s <= d.start_s)
        throw ConfigError("scene: malformed dropout window");
  }

  [[nodiscard]] InterPrismDistances delta() const {
    InterPrismDistances d;
    d.alpha_m = (prism_offsets_body[0] - prism_offsets_body[1]).norm();
    d.beta_m = (prism_offsets_body[0] - prism_offsets_body[2]).norm();
    d.gamma_m = (prism_offsets_body[1] - prism_offsets_body[2]).norm();
    return d;
  }
};

// ---------------------------------------------------------------------------
// Body path
// ---------------------------------------------------------------------------

/// Arc-length parameterized body path with heading tangent to the track.
/// Deterministic, noise-free; doubles as the ground-truth query surface.
class ScenePath {
 public:
  explicit ScenePath(const SceneConfig& cfg) : cfg_(cfg) {
    if (cfg.kind == TrajectoryKind::figure_eight) build_lemniscate_table();
    if (cfg.kind == TrajectoryKind::scripted) build_waypoint_table();
    if (cfg.kind == TrajectoryKind::l_shape) {
      const double travelled =
          cfg.speed_mps * std::max(0.0, cfg.duration_s - cfg.static_lead_s);
      const double arc = 0.5 * kPi * cfg.turn_radius_m;
      leg_m_ = cfg.l_leg_m > 0.0 ? cfg.l_leg_m
                                 : std::max(1.0, 0.5 * (travelled - arc));
    }
  }

  /// Body position and heading at time t.  The body rests for the static
  /// lead, ramps to cruise speed at the configured acceleration, then keeps
  /// a constant speed along the track.  Track-local poses are placed into
  /// the world by path_center_world and path_yaw_rad.
  [[nodiscard]] std::pair<Eigen::Vector3d, double> body_pose(double t) const {
    const double moving = std::max(0.0, t - cfg_.static_lead_s);
    double s = 0.0;
    if (cfg_.accel_mps2 <= 0.0) {
      s = cfg_.speed_mps * moving;
    } else {
      const double t_ramp = cfg_.speed_mps / cfg_.accel_mps2;
      s = moving <= t_ramp
              ? 0.5 * cfg_.accel_mps2 * moving * moving
              : 0.5 * cfg_.speed_mps * t_ramp +
                    cfg_.speed_mps * (moving - t_ramp);
    }
    const auto [local, heading] = pose_at_arclength(s);
    return {cfg_.path_center_world + rot_z(cfg_.path_yaw_rad) * local,
            heading + cfg_.path_yaw_rad};
  }

  /// World position of prism k (0-based) at time t.
  [[nodiscard]] Eigen::Vector3d prism_world(int k, double t) const {
    const auto [c, heading] = body_pose(t);
    return c + rot_z(heading) * cfg_.prism_offsets_body[static_cast<std::size_t>(k)];
  }

 private:
  [[nodiscard]] std::pair<Eigen::Vector3d, double> pose_at_arclength(
      double s) const {
    switch (cfg_.kind) {
      case TrajectoryKind::static_pose:
        return {Eigen::Vector3d::Zero(), 0.0};
      case TrajectoryKind::straight_line:
        return {Eigen::Vector3d(s, 0.0, 0.0), 0.0};
      case TrajectoryKind::l_shape: {
        const double arc = 0.5 * kPi * cfg_.turn_radius_m;
        if (s <= leg_m_) return {Eigen::Vector3d(s, 0.0, 0.0), 0.0};
        if (s <= leg_m_ + arc) {
          const double chi = (s - leg_m_) / cfg_.turn_radius_m;
          return {Eigen::Vector3d(
                      leg_m_ + cfg_.turn_radius_m * std::sin(chi),
                      cfg_.turn_radius_m * (1.0 - std::cos(chi)), 0.0),
                  chi};
        }
        return {Eigen::Vector3d(leg_m_ + cfg_.turn_radius_m,
                                cfg_.turn_radius_m + (s - leg_m_ - arc), 0.0),
                0.5 * kPi};
      }
      case TrajectoryKind::figure_eight: {
        const double u = lemniscate_u(std::fmod(s, table_total_m_));
        const double a = cfg_.figure_eight_half_length_m;
        const double b = cfg_.figure_eight_half_width_m;
        const double heading =
            std::atan2(b * std::cos(2.0 * u), a * std::cos(u));
        return {Eigen::Vector3d(a * std::sin(u),
                                b * std::sin(u) * std::cos(u), 0.0),
                heading};
      }
      case TrajectoryKind::scripted: {
        // Waypoints are world coordinates already; undo the placement so the
        // shared world mapping in body_pose() restores them.
        const double sc = std::min(s, table_total_m_);
        std::size_t seg = 0;
        while (seg + 1 < waypoint_s_.size() && waypoint_s_[seg + 1] < sc) ++seg;
        const Eigen::Vector3d d =
            cfg_.waypoints[seg + 1] - cfg_.waypoints[seg];
        const double len = d.norm();
        const double w = len > 0.0 ? (sc - waypoint_s_[seg]) / len : 0.0;
        const Eigen::Vector3d world = cfg_.waypoints[seg] + w * d;
        return {rot_z(cfg_.path_yaw_rad).transpose() *
                    (world - cfg_.path_center_world),
                std::atan2(d.y(), d.x()) - cfg_.path_yaw_rad};
      }
    }
    throw ConfigError("scene: unknown trajectory kind");
  }

  void build_lemniscate_table() {
    const double a = cfg_.figure_eight_half_length_m;
    const double b = cfg_.figure_eight_half_width_m;
    const std::size_t n = 8192;
    u_table_.resize(n + 1);
    s_table_.resize(n + 1);
    double acc = 0.0;
    double px = 0.0, py = 0.0;
    for (std::size_t i = 0; i <= n; ++i) {
      const double u = 2.0 * kPi * static_cast<double>(i) / static_cast<double>(n);
      const double x = a * std::sin(u);
      const double y = b * std::sin(u) * std::cos(u);
      if (i > 0) acc += std::hypot(x - px, y - py);
      u_table_[i] = u;
      s_table_[i] = acc;
      px = x;
      py = y;
    }
    table_total_m_ = acc;
  }

  void build_waypoint_table() {
    waypoint_s_.resize(cfg_.waypoints.size());
    waypoint_s_[0] = 0.0;
    for (std::size_t i = 1; i < cfg_.waypoints.size(); ++i)
      waypoint_s_[i] = waypoint_s_[i - 1] +
                (cfg_.waypoints[i] - cfg_.waypoints[i - 1]).norm();
    table_total_m_ = waypoint_s_.back();
  }

  [[nodiscard]] double lemniscate_u(double s) const {
    const auto it = std::lower_bound(s_table_.begin(), s_table_.end(), s);
    if (it == s_table_.begin()) return u_table_.front();
    if (it == s_table_.end()) return u_table_.back();
    const std::size_t hi = static_cast<std::size_t>(it - s_table_.begin());
    const double w =
        (s - s_table_[hi - 1]) / (s_table_[hi] - s_table_[hi - 1]);
    return u_table_[hi - 1] + w * (u_table_[hi] - u_table_[hi - 1]);
  }

  SceneConfig cfg_;
  std::vector<double> u_table_, s_table_, waypoint_s_;
  double table_total_m_ = 0.0;
  double leg_m_ = 0.0;
};

// ---------------------------------------------------------------------------
// Ground truth and scene generation
// ---------------------------------------------------------------------------

struct OutlierRecord {
  int station_id = 0;
  std::size_t record_index = 0;  ///< index into the emitted log
  double time_s = 0.0;
};

struct GroundTruth {
  RigidTransform world_from_station1, t_12, t_13;
  InterPrismDistances delta;
  std::vector<double> dense_times_s;
  std::array<std::vector<Eigen::Vector3d>, 3> prism_world;  ///< at dense times
  std::vector<OutlierRecord> outliers;
  std::vector<GcpObservation> gcps_world;
  SceneConfig config;  ///< full scene for exact position queries

  /// Exact (noise-free) world position of prism k (0-based) at time t.
  [[nodiscard]] Eigen::Vector3d prism_world_at(int k, double t) const {
    return ScenePath(config).prism_world(k, t);
  }
};

struct SimulatedScene {
  std::array<MeasurementLog, 3> logs;
  GroundTruth truth;
  InterPrismDistances delta;
  std::array<GcpSet, 3> station_gcps;  ///< empty unless gcps_world configured
};

/// Generates the three tracking logs (plus optional static-GCP observations)
/// for a scene.  Fully deterministic given cfg.seed.
inline SimulatedScene generate_scene(const SceneConfig& cfg) {
  cfg.require_valid();
  const ScenePath path(cfg);

  SimulatedScene scene;
  scene.delta = cfg.delta();
  scene.delta.require_valid();

  const std::array<RigidTransform, 3> world_from_station = {
      cfg.world_from_station1, cfg.world_from_station1 * cfg.t_12,
      cfg.world_from_station1 * cfg.t_13};

  for (int s = 0; s < 3; ++s) {
    RandomStream noise(cfg.seed, 10 + static_cast<std::uint64_t>(s));
    RandomStream phase(cfg.seed, 20 + static_cast<std::uint64_t>(s));
    RandomStream faults(cfg.seed, 30 + static_cast<std::uint64_t>(s));

    MeasurementLog log;
    log.station_id = s + 1;
    const int prism = cfg.shared_prism ? 0 : s;
    const RigidTransform station_from_world = world_from_station[static_cast<std::size_t>(s)].inverse();

    const double period = 1.0 / cfg.rate_hz;
    const double t0 =
        cfg.synchronized_sampling ? 0.0 : phase.uniform(0.0, period);
    for (double t = t0; t <= cfg.duration_s; t += period) {
      bool dropped = false;
      for (const auto& d : cfg.dropouts)
        if (d.station_id == s + 1 && t >= d.start_s && t <= d.end_s)
          dropped = true;
      if (dropped) continue;

      const Eigen::Vector3d q = station_from_world * path.prism_world(prism, t);
      PolarMeasurement m = cartesian_to_polar(q, t, s + 1, prism + 1);
      m.range_m += cfg.range_noise_sigma_m * noise.normal();
      m.azimuth_rad =
          wrap_two_pi(m.azimuth_rad + cfg.angle_noise_sigma_rad * noise.normal());
      m.elevation_rad += cfg.angle_noise_sigma_rad * noise.normal();
      log.records.push_back(m);
    }
    if (log.records.size() < 2)
      throw ConfigError("scene: station " + std::to_string(s + 1) +
                        " produced fewer than 2 samples");

    // Isolated angular faults; never the first sample.
    std::size_t last_fault = 0;
    bool any_fault = false;
    for (std::size_t i = 1; i < log.records.size(); ++i) {
      const double roll = faults.uniform();
      if (roll >= cfg.outlier_rate) continue;
      if (any_fault && i - last_fault < 3) continue;
      auto& m = log.records[i];
      const double az_off = (faults.uniform() < 0.5 ? -1.0 : 1.0) *
                            deg_to_rad(faults.uniform(0.5, 2.0));
      const double el_off = (faults.uniform() < 0.5 ? -1.0 : 1.0) *
                            deg_to_rad(faults.uniform(0.5, 2.0));
      m.azimuth_rad = wrap_two_pi(m.azimuth_rad + az_off);
      m.elevation_rad = std::clamp(m.elevation_rad + el_off,
                                   -0.49 * kPi, 0.49 * kPi);
      scene.truth.outliers.push_back({s + 1, i, m.time_s});
      last_fault = i;
      any_fault = true;
    }

    scene.logs[static_cast<std::size_t>(s)] = std::move(log);
  }

  // Static GCP observations for the GCP-based methods.
  if (!cfg.gcps_world.empty()) {
    const int shots = std::max(1, cfg.gcp_shots);
    for (int s = 0; s < 3; ++s) {
      RandomStream gnoise(cfg.seed, 40 + static_cast<std::uint64_t>(s));
      const RigidTransform station_from_world =
          world_from_station[static_cast<std::size_t>(s)].inverse();
      GcpSet set;
      set.frame_id = station_frame(s + 1);
      for (const auto& g : cfg.gcps_world) {
        Eigen::Vector3d acc = Eigen::Vector3d::Zero();
        for (int shot = 0; shot < shots; ++shot) {
          PolarMeasurement m =
              cartesian_to_polar(station_from_world * g.position, 0.0, s + 1, 0);
          m.range_m += cfg.range_noise_sigma_m * gnoise.normal();
          m.azimuth_rad = wrap_two_pi(m.azimuth_rad +
                                      cfg.angle_noise_sigma_rad * gnoise.normal());
          m.elevation_rad += cfg.angle_noise_sigma_rad * gnoise.normal();
          acc += polar_to_cartesian(m).position;
        }
        set.points.push_back({g.label, acc / static_cast<double>(shots)});
      }
      scene.station_gcps[static_cast<std::size_t>(s)] = std::move(set);
    }
  }

  // Ground truth record.
  scene.truth.world_from_station1 = cfg.world_from_station1;
  scene.truth.t_12 = cfg.t_12;
  scene.truth.t_13 = cfg.t_13;
  scene.truth.delta = scene.delta;
  scene.truth.gcps_world = cfg.gcps_world;
  scene.truth.config = cfg;
  const double dense_dt = 0.5 / cfg.rate_hz;
  for (double t = 0.0; t <= cfg.duration_s; t += dense_dt) {
    scene.truth.dense_times_s.push_back(t);
    for (int k = 0; k < 3; ++k)
      scene.truth.prism_world[static_cast<std::size_t>(k)].push_back(
          path.prism_world(k, t));
  }
  return scene;
}

/// Translation/rotation error of each estimated transform against truth.
struct TruthErrors {
  double trans_12_m = 0.0;
  double rot_12_rad = 0.0;
  double trans_13_m = 0.0;
  double rot_13_rad = 0.0;
};

inline TruthErrors evaluate_against_truth(const CalibrationResult& result,
                                          const GroundTruth& truth) {
  TruthErrors e;
  std::tie(e.trans_12_m, e.rot_12_rad) =
      transform_delta(result.t_12, truth.t_12);
  std::tie(e.trans_13_m, e.rot_13_rad) =
      transform_delta(result.t_13, truth.t_13);
  return e;
}

}  // namespace rtscal
