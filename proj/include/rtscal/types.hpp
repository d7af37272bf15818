#pragma once

#include <Eigen/Core>
#include <cmath>
#include <string>
#include <vector>

#include "rtscal/errors.hpp"

namespace rtscal {

inline constexpr double kPi = 3.14159265358979323846;

/// Wrap an angle to (-pi, pi].
inline double wrap_pi(double a) {
  a = std::fmod(a, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  if (a > kPi) a -= 2.0 * kPi;
  return a;
}

/// Wrap an angle to [0, 2*pi).
inline double wrap_two_pi(double a) {
  a = std::fmod(a, 2.0 * kPi);
  if (a < 0.0) a += 2.0 * kPi;
  if (a >= 2.0 * kPi) a -= 2.0 * kPi;
  return a;
}

inline double deg_to_rad(double d) { return d * kPi / 180.0; }
inline double rad_to_deg(double r) { return r * 180.0 / kPi; }

// ---------------------------------------------------------------------------
// Measurement-side domain types
// ---------------------------------------------------------------------------
//
// Coordinate convention used throughout the library:
//   z points up, azimuth is measured clockwise from +y ("north") in the
//   horizontal plane, elevation is measured from the horizontal plane.
// Angles are radians everywhere inside the library; degrees appear only in
// files and CLI flags.

/// One timestamped polar reading from one station tracking one prism.
struct PolarMeasurement {
  double time_s = 0.0;        ///< seconds on the common epoch
  double azimuth_rad = 0.0;   ///< [0, 2*pi)
  double elevation_rad = 0.0; ///< (-pi/2, pi/2)
  double range_m = 0.0;       ///< > 0
  int station_id = 0;         ///< {1,2,3}
  int prism_id = 0;           ///< {1,2,3}

  [[nodiscard]] bool valid() const {
    return std::isfinite(time_s) && std::isfinite(azimuth_rad) &&
           std::isfinite(elevation_rad) && std::isfinite(range_m) &&
           range_m > 0.0 && elevation_rad > -kPi / 2.0 &&
           elevation_rad < kPi / 2.0 && azimuth_rad >= 0.0 &&
           azimuth_rad < 2.0 * kPi;
  }
};

/// A timestamped Cartesian point with the frame it is expressed in.
struct CartesianPoint {
  double time_s = 0.0;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  std::string frame_id;

  [[nodiscard]] bool valid() const { return position.allFinite(); }
};

/// Time-ordered prism positions in a single frame, stored column-wise.
struct Trajectory {
  std::vector<double> times_s;
  std::vector<Eigen::Vector3d> points;
  std::string frame_id;

  [[nodiscard]] std::size_t size() const { return times_s.size(); }
  [[nodiscard]] bool empty() const { return times_s.empty(); }
};

/// Raw per-station tracking log: strictly increasing timestamps, one station.
struct MeasurementLog {
  int station_id = 0;
  std::vector<PolarMeasurement> records;

  [[nodiscard]] std::size_t size() const { return records.size(); }
};

/// A labeled static control point.
struct GcpObservation {
  std::string label;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
};

/// Labeled static points, one set per frame.  Labels must be unique.
struct GcpSet {
  std::string frame_id;
  std::vector<GcpObservation> points;

  [[nodiscard]] std::size_t size() const { return points.size(); }

  /// Returns nullptr if the label is absent.
  [[nodiscard]] const GcpObservation* find(const std::string& label) const {
    for (const auto& p : points)
      if (p.label == label) return &p;
    return nullptr;
  }
};

/// Premeasured rigid-body constraint between the three prisms:
/// alpha = |p1-p2|, beta = |p1-p3|, gamma = |p2-p3|.
struct InterPrismDistances {
  double alpha_m = 0.0;
  double beta_m = 0.0;
  double gamma_m = 0.0;

  /// All distances positive and the strict triangle inequality holds.
  [[nodiscard]] bool valid() const {
    if (!(alpha_m > 0.0 && beta_m > 0.0 && gamma_m > 0.0)) return false;
    return alpha_m + beta_m > gamma_m && alpha_m + gamma_m > beta_m &&
           beta_m + gamma_m > alpha_m;
  }

  void require_valid() const {
    if (!valid())
      throw ConfigError(
          "inter-prism distances must be positive and satisfy the strict "
          "triangle inequality");
  }
};

/// Conventional frame names.
inline std::string station_frame(int station_id) {
  return "station" + std::to_string(station_id);
}
inline constexpr const char* kWorldFrame = "world";

}  // namespace rtscal
