#pragma once

#include <Eigen/Core>
#include <Eigen/LU>
#include <cmath>
#include <string>
#include <utility>

#include "rtscal/errors.hpp"
#include "rtscal/types.hpp"

namespace rtscal {

inline constexpr double kOrthonormalTol = 1e-9;
inline constexpr double kYawOnlyTol = 1e-9;

// ---------------------------------------------------------------------------
// Rigid transforms (leveled instruments -> yaw-only rotations)
// ---------------------------------------------------------------------------

/// Rotation about +z by phi (counterclockwise seen from above).
inline Eigen::Matrix3d rot_z(double phi) {
  const double c = std::cos(phi);
  const double s = std::sin(phi);
  Eigen::Matrix3d r;
  r << c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0;
  return r;
}

/// SE(3) pose q_to = R * q_from + t.  Frame tags are optional; an empty tag
/// matches anything.
struct RigidTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  std::string from_frame;
  std::string to_frame;

  static RigidTransform identity(std::string from = "", std::string to = "") {
    RigidTransform t;
    t.from_frame = std::move(from);
    t.to_frame = std::move(to);
    return t;
  }

  static RigidTransform from_yaw(double phi, const Eigen::Vector3d& t,
                                 std::string from = "", std::string to = "") {
    RigidTransform out;
    out.rotation = rot_z(phi);
    out.translation = t;
    out.from_frame = std::move(from);
    out.to_frame = std::move(to);
    return out;
  }

  [[nodiscard]] Eigen::Vector3d apply(const Eigen::Vector3d& p) const {
    return rotation * p + translation;
  }
  [[nodiscard]] Eigen::Vector3d operator*(const Eigen::Vector3d& p) const {
    return apply(p);
  }

  /// Composition: (a * b) maps b.from_frame into a.to_frame.
  [[nodiscard]] RigidTransform operator*(const RigidTransform& b) const {
    if (!from_frame.empty() && !b.to_frame.empty() && from_frame != b.to_frame)
      throw ConfigError("transform composition frame mismatch: '" +
                        from_frame + "' vs '" + b.to_frame + "'");
    RigidTransform out;
    out.rotation = rotation * b.rotation;
    out.translation = rotation * b.translation + translation;
    out.from_frame = b.from_frame;
    out.to_frame = to_frame;
    return out;
  }

  [[nodiscard]] RigidTransform inverse() const {
    RigidTransform out;
    out.rotation = rotation.transpose();
    out.translation = -(out.rotation * translation);
    out.from_frame = to_frame;
    out.to_frame = from_frame;
    return out;
  }

  /// || R^T R - I || below tolerance and det(R) = +1.
  [[nodiscard]] bool orthonormal(double tol = kOrthonormalTol) const {
    const Eigen::Matrix3d e =
        rotation.transpose() * rotation - Eigen::Matrix3d::Identity();
    return e.norm() < tol && rotation.determinant() > 0.0;
  }

  /// Rotation leaves the z-axis fixed within tolerance.
  [[nodiscard]] bool yaw_only(double tol = kYawOnlyTol) const {
    return std::abs(rotation(0, 2)) < tol && std::abs(rotation(1, 2)) < tol &&
           std::abs(rotation(2, 0)) < tol && std::abs(rotation(2, 1)) < tol &&
           std::abs(rotation(2, 2) - 1.0) < tol;
  }

  /// Yaw angle read off the rotation block (meaningful for yaw-only poses).
  [[nodiscard]] double yaw() const {
    return std::atan2(rotation(1, 0) - rotation(0, 1),
                      rotation(0, 0) + rotation(1, 1));
  }

  [[nodiscard]] Eigen::Matrix4d matrix() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = rotation;
    m.topRightCorner<3, 1>() = translation;
    return m;
  }
};

// ---------------------------------------------------------------------------
// Constrained se(3): yaw-only twists
// ---------------------------------------------------------------------------

/// se(3) parameters constrained to a leveled instrument: three translation
/// parameters and a single yaw angle (the rotation vector is [0, 0, phi]).
struct Twist {
  Eigen::Vector3d rho = Eigen::Vector3d::Zero();  ///< meters
  double phi = 0.0;                               ///< radians, (-pi, pi]

  [[nodiscard]] bool valid() const {
    return rho.allFinite() && std::isfinite(phi);
  }
};

namespace detail {

/// Coefficients of the yaw-restricted SE(3) left Jacobian
///   V(phi) = [[a, -b, 0], [b, a, 0], [0, 0, 1]]
/// with a = sin(phi)/phi and b = (1-cos(phi))/phi.
struct VCoeffs {
  double a = 1.0;
  double b = 0.0;
};

inline VCoeffs v_coeffs(double phi) {
  if (phi == 0.0) return {1.0, 0.0};
  const double h = std::sin(0.5 * phi);
  return {std::sin(phi) / phi, 2.0 * h * h / phi};
}

/// d/dphi of the coefficients above.  Series below 1e-4 where the closed
/// forms lose digits to cancellation.
inline VCoeffs v_coeffs_deriv(double phi) {
  if (std::abs(phi) < 1e-4) {
    const double p2 = phi * phi;
    return {-phi / 3.0 + phi * p2 / 30.0, 0.5 - p2 / 8.0 + p2 * p2 / 144.0};
  }
  const double p2 = phi * phi;
  const double s = std::sin(phi);
  const double c = std::cos(phi);
  return {(phi * c - s) / p2, (phi * s - (1.0 - c)) / p2};
}

inline Eigen::Matrix3d v_matrix(double phi) {
  const VCoeffs v = v_coeffs(phi);
  Eigen::Matrix3d m;
  m << v.a, -v.b, 0.0, v.b, v.a, 0.0, 0.0, 0.0, 1.0;
  return m;
}

inline Eigen::Matrix3d v_matrix_deriv(double phi) {
  const VCoeffs v = v_coeffs_deriv(phi);
  Eigen::Matrix3d m;
  m << v.a, -v.b, 0.0, v.b, v.a, 0.0, 0.0, 0.0, 0.0;
  return m;
}

/// d/dphi of rot_z(phi).
inline Eigen::Matrix3d rot_z_deriv(double phi) {
  const double c = std::cos(phi);
  const double s = std::sin(phi);
  Eigen::Matrix3d m;
  m << -s, -c, 0.0, c, -s, 0.0, 0.0, 0.0, 0.0;
  return m;
}

}  // namespace detail

/// Exponential map of a yaw-only twist:
///   R = rot_z(phi), t = V(phi) * rho.
inline RigidTransform exp_map(const Twist& xi, std::string from = "",
                              std::string to = "") {
  if (!xi.valid()) throw ConfigError("exp_map: non-finite twist");
  RigidTransform t;
  t.rotation = rot_z(xi.phi);
  t.translation = detail::v_matrix(xi.phi) * xi.rho;
  t.from_frame = std::move(from);
  t.to_frame = std::move(to);
  return t;
}

/// Inverse of exp_map.  Throws if the rotation does not leave the z-axis
/// fixed (an unleveled transform).
inline Twist log_map(const RigidTransform& t) {
  if (!t.yaw_only())
    throw ConfigError("log_map: transform is not yaw-only (unleveled?)");
  Twist xi;
  xi.phi = wrap_pi(t.yaw());
  const detail::VCoeffs v = detail::v_coeffs(xi.phi);
  const double den = v.a * v.a + v.b * v.b;
  // V(phi)^-1 acts on the horizontal block; z passes through.
  xi.rho.x() = (v.a * t.translation.x() + v.b * t.translation.y()) / den;
  xi.rho.y() = (-v.b * t.translation.x() + v.a * t.translation.y()) / den;
  xi.rho.z() = t.translation.z();
  return xi;
}

/// Translation and rotation difference between two transforms over the same
/// frame pair: (||t_a - t_b||, angle of R_a^T R_b).
inline std::pair<double, double> transform_delta(const RigidTransform& a,
                                                 const RigidTransform& b) {
  const auto mismatch = [](const std::string& x, const std::string& y) {
    return !x.empty() && !y.empty() && x != y;
  };
  if (mismatch(a.from_frame, b.from_frame) || mismatch(a.to_frame, b.to_frame))
    throw ConfigError("transform_delta: frame pair mismatch");
  const double trans = (a.translation - b.translation).norm();
  const Eigen::Matrix3d rel = a.rotation.transpose() * b.rotation;
  const double c = std::clamp((rel.trace() - 1.0) / 2.0, -1.0, 1.0);
  return {trans, std::acos(c)};
}

// ---------------------------------------------------------------------------
// Polar -> Cartesian
// ---------------------------------------------------------------------------

/// Convert one polar reading to Cartesian station-frame coordinates:
///   x = r cos(el) sin(az), y = r cos(el) cos(az), z = r sin(el).
inline CartesianPoint polar_to_cartesian(const PolarMeasurement& m) {
  if (!m.valid())
    throw ConfigError("polar_to_cartesian: measurement violates invariants");
  CartesianPoint p;
  p.time_s = m.time_s;
  const double ce = std::cos(m.elevation_rad);
  p.position.x() = m.range_m * ce * std::sin(m.azimuth_rad);
  p.position.y() = m.range_m * ce * std::cos(m.azimuth_rad);
  p.position.z() = m.range_m * std::sin(m.elevation_rad);
  p.frame_id = station_frame(m.station_id);
  return p;
}

/// Inverse of polar_to_cartesian; the station observes point p in its own
/// frame.  Used by the simulator and handy for diagnostics.
inline PolarMeasurement cartesian_to_polar(const Eigen::Vector3d& p,
                                           double time_s, int station_id,
                                           int prism_id) {
  PolarMeasurement m;
  m.time_s = time_s;
  m.station_id = station_id;
  m.prism_id = prism_id;
  m.range_m = p.norm();
  if (m.range_m <= 0.0)
    throw ConfigError("cartesian_to_polar: point coincides with the station");
  m.elevation_rad = std::asin(std::clamp(p.z() / m.range_m, -1.0, 1.0));
  m.azimuth_rad = wrap_two_pi(std::atan2(p.x(), p.y()));
  return m;
}

}  // namespace rtscal
