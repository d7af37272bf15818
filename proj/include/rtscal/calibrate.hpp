#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/SVD>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rtscal/errors.hpp"
#include "rtscal/metrics.hpp"
#include "rtscal/preprocess.hpp"
#include "rtscal/se3.hpp"
#include "rtscal/types.hpp"

namespace rtscal {

// ---------------------------------------------------------------------------
// Results
// ---------------------------------------------------------------------------

enum class Validation { validated, unvalidated, degenerate };

inline const char* to_string(Validation v) {
  switch (v) {
    case Validation::validated: return "validated";
    case Validation::unvalidated: return "unvalidated";
    case Validation::degenerate: return "degenerate";
  }
  return "unvalidated";
}

struct CalibrationResult {
  RigidTransform t_12;  ///< station2 -> station1
  RigidTransform t_13;  ///< station3 -> station1
  std::string method;
  double final_cost_m2 = 0.0;
  std::vector<double> residuals_m;  ///< per-sample correspondence residuals
  int iterations = 0;
  bool converged = true;
  Validation validation = Validation::validated;
  /// Cost after every accepted solver step (inter-prism method only);
  /// front() is the cost at the prior.
  std::vector<double> cost_history;
  /// Station -> world poses when a world frame was involved (methods A/B).
  std::optional<std::array<RigidTransform, 3>> world_poses;
};

// ---------------------------------------------------------------------------
// Point-to-point alignment (Eq. 1 workhorse)
// ---------------------------------------------------------------------------

/// Least-squares rigid alignment: returns argmin_T sum_k |ref_k - T meas_k|^2.
///
/// Full SE(3): closed form via centroid subtraction and orthogonal Procrustes
/// on the cross-covariance, with the sign of the smallest singular direction
/// corrected to keep det(R) = +1.  Yaw-only: closed-form 2-D Procrustes angle
/// on the horizontal components; the z translation is the mean z difference.
inline RigidTransform point_to_point_align(
    std::span<const Eigen::Vector3d> reference,
    std::span<const Eigen::Vector3d> measured, bool yaw_only,
    std::string from_frame = "", std::string to_frame = "") {
  const std::size_t n = reference.size();
  if (n != measured.size())
    throw ConfigError("point_to_point_align: size mismatch");
  if (n < (yaw_only ? 2u : 3u))
    throw ConfigError(yaw_only
                          ? "point_to_point_align: yaw-only needs >= 2 points"
                          : "point_to_point_align: full SE(3) needs >= 3 points");

  Eigen::Vector3d ref_mean = Eigen::Vector3d::Zero();
  Eigen::Vector3d meas_mean = Eigen::Vector3d::Zero();
  for (std::size_t k = 0; k < n; ++k) {
    ref_mean += reference[k];
    meas_mean += measured[k];
  }
  ref_mean /= static_cast<double>(n);
  meas_mean /= static_cast<double>(n);

  RigidTransform out;
  out.from_frame = std::move(from_frame);
  out.to_frame = std::move(to_frame);

  if (yaw_only) {
    // Maximize cos(phi)*C + sin(phi)*S over the centered horizontal parts.
    double c_acc = 0.0, s_acc = 0.0, spread_ref = 0.0, spread_meas = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const Eigen::Vector3d q = reference[k] - ref_mean;
      const Eigen::Vector3d p = measured[k] - meas_mean;
      c_acc += q.x() * p.x() + q.y() * p.y();
      s_acc += q.y() * p.x() - q.x() * p.y();
      spread_ref += q.head<2>().squaredNorm();
      spread_meas += p.head<2>().squaredNorm();
    }
    const double nn = static_cast<double>(n);
    if (std::sqrt(spread_ref / nn) < 1e-9 || std::sqrt(spread_meas / nn) < 1e-9)
      throw DegenerateError(
          "point_to_point_align: horizontally coincident points leave yaw "
          "unconstrained");
    const double phi = std::atan2(s_acc, c_acc);
    out.rotation = rot_z(phi);
  } else {
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (std::size_t k = 0; k < n; ++k)
      cov += (measured[k] - meas_mean) * (reference[k] - ref_mean).transpose();
    cov /= static_cast<double>(n);
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(
        cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::Vector3d sv = svd.singularValues();
    if (sv(1) <= 1e-12 * std::max(sv(0), 1e-300))
      throw DegenerateError(
          "point_to_point_align: collinear points leave the rotation "
          "unconstrained");
    Eigen::Matrix3d s = Eigen::Matrix3d::Identity();
    if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0)
      s(2, 2) = -1.0;
    out.rotation = svd.matrixV() * s * svd.matrixU().transpose();
  }
  out.translation = ref_mean - out.rotation * meas_mean;
  return out;
}

inline RigidTransform point_to_point_align(
    const std::vector<Eigen::Vector3d>& reference,
    const std::vector<Eigen::Vector3d>& measured, bool yaw_only,
    std::string from_frame = "", std::string to_frame = "") {
  return point_to_point_align(std::span<const Eigen::Vector3d>(reference),
                              std::span<const Eigen::Vector3d>(measured),
                              yaw_only, std::move(from_frame),
                              std::move(to_frame));
}

// ---------------------------------------------------------------------------
// Method A: two-point resection
// ---------------------------------------------------------------------------

/// Locates one leveled station from two control points with precisely known
/// relative position: the yaw-only transform mapping the measured pair onto
/// the known pair, exact on both points.  Correspondence is by index.
inline RigidTransform two_point_resection(
    const GcpSet& known, const std::vector<CartesianPoint>& measured) {
  if (known.size() != 2 || measured.size() != 2)
    throw ConfigError("two_point_resection: exactly two points required");
  const Eigen::Vector2d known_sep =
      (known.points[1].position - known.points[0].position).head<2>();
  const Eigen::Vector2d meas_sep =
      (measured[1].position - measured[0].position).head<2>();
  if (known_sep.norm() < 0.01 || meas_sep.norm() < 0.01)
    throw DegenerateError(
        "two_point_resection: horizontal separation below 1 cm");
  const std::vector<Eigen::Vector3d> ref = {known.points[0].position,
                                            known.points[1].position};
  const std::vector<Eigen::Vector3d> meas = {measured[0].position,
                                             measured[1].position};
  return point_to_point_align(ref, meas, /*yaw_only=*/true,
                              measured[0].frame_id, known.frame_id);
}

// ---------------------------------------------------------------------------
// Method B: static GCP calibration
// ---------------------------------------------------------------------------

namespace detail {

/// Labels present in every supplied set, sorted for determinism.
inline std::vector<std::string> common_labels(
    std::span<const GcpSet* const> sets) {
  std::vector<std::string> labels;
  if (sets.empty()) return labels;
  for (const auto& p : sets.front()->points) {
    bool everywhere = true;
    for (std::size_t i = 1; i < sets.size(); ++i)
      if (sets[i]->find(p.label) == nullptr) everywhere = false;
    if (everywhere) labels.push_back(p.label);
  }
  std::sort(labels.begin(), labels.end());
  return labels;
}

inline double mean_square(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return v.empty() ? 0.0 : acc / static_cast<double>(v.size());
}

}  // namespace detail

/// Aligns per-station GCP observations.  With a world set, solves each
/// station's world pose and derives the relative transforms; without one,
/// station 1's frame is the origin.  Requires >= 3 labels common to all
/// inputs.  yaw_only reflects the leveled-instrument assumption and is the
/// default; pass false to solve full SE(3).
inline CalibrationResult static_gcp_calibrate(
    const std::array<GcpSet, 3>& station_gcps,
    const GcpSet* world_gcps = nullptr, bool yaw_only = true) {
  std::vector<const GcpSet*> sets = {&station_gcps[0], &station_gcps[1],
                                     &station_gcps[2]};
  if (world_gcps != nullptr) sets.push_back(world_gcps);
  const std::vector<std::string> labels = detail::common_labels(sets);
  if (labels.size() < 3)
    throw ConfigError("static_gcp_calibrate: need >= 3 common labels, got " +
                      std::to_string(labels.size()));

  std::array<std::vector<Eigen::Vector3d>, 3> pts;
  for (int s = 0; s < 3; ++s)
    for (const auto& label : labels)
      pts[s].push_back(station_gcps[s].find(label)->position);

  CalibrationResult result;
  result.method = "static_gcp";

  if (world_gcps != nullptr) {
    std::vector<Eigen::Vector3d> world_pts;
    for (const auto& label : labels)
      world_pts.push_back(world_gcps->find(label)->position);
    std::array<RigidTransform, 3> world_poses;
    for (int s = 0; s < 3; ++s) {
      world_poses[s] =
          point_to_point_align(world_pts, pts[s], yaw_only,
                               station_frame(s + 1), world_gcps->frame_id);
      for (std::size_t k = 0; k < labels.size(); ++k)
        result.residuals_m.push_back(
            (world_pts[k] - world_poses[s] * pts[s][k]).norm());
    }
    result.t_12 = world_poses[0].inverse() * world_poses[1];
    result.t_13 = world_poses[0].inverse() * world_poses[2];
    result.world_poses = world_poses;
  } else {
    result.t_12 = point_to_point_align(pts[0], pts[1], yaw_only,
                                       station_frame(2), station_frame(1));
    result.t_13 = point_to_point_align(pts[0], pts[2], yaw_only,
                                       station_frame(3), station_frame(1));
    for (std::size_t k = 0; k < labels.size(); ++k) {
      result.residuals_m.push_back((pts[0][k] - result.t_12 * pts[1][k]).norm());
      result.residuals_m.push_back((pts[0][k] - result.t_13 * pts[2][k]).norm());
    }
  }
  result.final_cost_m2 = detail::mean_square(result.residuals_m);
  return result;
}

/// Method A driver: resect all three stations from the same two known points
/// and derive the relative transforms.  measured[s] are station s+1's
/// observations of the two GCPs, index-matched with `known`.
inline CalibrationResult two_point_calibrate(
    const GcpSet& known,
    const std::array<std::vector<CartesianPoint>, 3>& measured) {
  CalibrationResult result;
  result.method = "two_point";
  std::array<RigidTransform, 3> world_poses;
  for (int s = 0; s < 3; ++s) {
    world_poses[s] = two_point_resection(known, measured[s]);
    for (std::size_t k = 0; k < 2; ++k)
      result.residuals_m.push_back(
          (known.points[k].position - world_poses[s] * measured[s][k].position)
              .norm());
  }
  result.t_12 = world_poses[0].inverse() * world_poses[1];
  result.t_13 = world_poses[0].inverse() * world_poses[2];
  result.world_poses = world_poses;
  result.final_cost_m2 = detail::mean_square(result.residuals_m);
  return result;
}

// ---------------------------------------------------------------------------
// Method C: dynamic GCP calibration
// ---------------------------------------------------------------------------

/// Point-to-point alignment over synchronized samples of one shared prism
/// tracked by all three stations.
inline CalibrationResult dynamic_gcp_calibrate(const SyncedTrajectories& synced,
                                               bool yaw_only = true) {
  if (synced.size() < 10)
    throw ConfigError("dynamic_gcp_calibrate: need >= 10 synchronized samples");
  if (!(synced.prism_ids[0] == synced.prism_ids[1] &&
        synced.prism_ids[1] == synced.prism_ids[2]))
    throw ConfigError(
        "dynamic_gcp_calibrate: stations are not tracking the same prism");

  CalibrationResult result;
  result.method = "dynamic_gcp";
  result.t_12 =
      point_to_point_align(synced.positions[0], synced.positions[1], yaw_only,
                           station_frame(2), station_frame(1));
  result.t_13 =
      point_to_point_align(synced.positions[0], synced.positions[2], yaw_only,
                           station_frame(3), station_frame(1));
  result.residuals_m.reserve(2 * synced.size());
  for (std::size_t j = 0; j < synced.size(); ++j) {
    result.residuals_m.push_back(
        (synced.positions[0][j] - result.t_12 * synced.positions[1][j]).norm());
    result.residuals_m.push_back(
        (synced.positions[0][j] - result.t_13 * synced.positions[2][j]).norm());
  }
  result.final_cost_m2 = detail::mean_square(result.residuals_m);
  return result;
}

// ---------------------------------------------------------------------------
// Method D: dynamic inter-prism calibration
// ---------------------------------------------------------------------------

/// Mean squared apparent-vs-premeasured distance error over all samples:
///   (1/3n) sum_j [ (|q1-T12 q2|-alpha)^2 + (|q1-T13 q3|-beta)^2
///                  + (|T12 q2-T13 q3|-gamma)^2 ].
inline double inter_prism_cost(const Twist& xi_12, const Twist& xi_13,
                               const SyncedTrajectories& synced,
                               const InterPrismDistances& delta) {
  const RigidTransform t_12 = exp_map(xi_12);
  const RigidTransform t_13 = exp_map(xi_13);
  const std::size_t n = synced.size();
  if (n == 0) throw ConfigError("inter_prism_cost: empty trajectories");
  double acc = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const Eigen::Vector3d q1 = synced.positions[0][j];
    const Eigen::Vector3d q2 = t_12 * synced.positions[1][j];
    const Eigen::Vector3d q3 = t_13 * synced.positions[2][j];
    const double ra = (q1 - q2).norm() - delta.alpha_m;
    const double rb = (q1 - q3).norm() - delta.beta_m;
    const double rc = (q2 - q3).norm() - delta.gamma_m;
    acc += ra * ra + rb * rb + rc * rc;
  }
  return acc / (3.0 * static_cast<double>(n));
}

namespace detail {

/// Residual vector (scaled so that sum of squares equals inter_prism_cost)
/// and, optionally, its analytic Jacobian with respect to the 8 parameters
/// [rho_12, phi_12, rho_13, phi_13].  Samples whose pairwise distance is
/// below 1e-12 get a zero Jacobian row (the norm is not differentiable
/// there); the residual is still evaluated.
inline void inter_prism_residuals(const Twist& xi_12, const Twist& xi_13,
                                  const SyncedTrajectories& synced,
                                  const InterPrismDistances& delta,
                                  Eigen::VectorXd& residuals,
                                  Eigen::MatrixXd* jacobian) {
  const std::size_t n = synced.size();
  const double scale = 1.0 / std::sqrt(3.0 * static_cast<double>(n));
  const RigidTransform t_12 = exp_map(xi_12);
  const RigidTransform t_13 = exp_map(xi_13);
  // d(T q)/d rho = V(phi); d(T q)/d phi = R'(phi) q + V'(phi) rho.
  const Eigen::Matrix3d v_12 = v_matrix(xi_12.phi);
  const Eigen::Matrix3d v_13 = v_matrix(xi_13.phi);
  const Eigen::Matrix3d dr_12 = rot_z_deriv(xi_12.phi);
  const Eigen::Matrix3d dr_13 = rot_z_deriv(xi_13.phi);
  const Eigen::Vector3d dv_rho_12 = v_matrix_deriv(xi_12.phi) * xi_12.rho;
  const Eigen::Vector3d dv_rho_13 = v_matrix_deriv(xi_13.phi) * xi_13.rho;

  residuals.resize(static_cast<Eigen::Index>(3 * n));
  if (jacobian != nullptr) {
    jacobian->resize(static_cast<Eigen::Index>(3 * n), 8);
    jacobian->setZero();
  }

  for (std::size_t j = 0; j < n; ++j) {
    const Eigen::Vector3d q2raw = synced.positions[1][j];
    const Eigen::Vector3d q3raw = synced.positions[2][j];
    const Eigen::Vector3d q1 = synced.positions[0][j];
    const Eigen::Vector3d q2 = t_12 * q2raw;
    const Eigen::Vector3d q3 = t_13 * q3raw;
    const Eigen::Vector3d dphi_12 = dr_12 * q2raw + dv_rho_12;
    const Eigen::Vector3d dphi_13 = dr_13 * q3raw + dv_rho_13;

    const auto row = static_cast<Eigen::Index>(3 * j);
    const Eigen::Vector3d da = q1 - q2;
    const Eigen::Vector3d db = q1 - q3;
    const Eigen::Vector3d dc = q2 - q3;
    const double na = da.norm();
    const double nb = db.norm();
    const double nc = dc.norm();
    residuals(row + 0) = (na - delta.alpha_m) * scale;
    residuals(row + 1) = (nb - delta.beta_m) * scale;
    residuals(row + 2) = (nc - delta.gamma_m) * scale;

    if (jacobian == nullptr) continue;
    if (na > 1e-12) {
      const Eigen::RowVector3d u = da.transpose() / na;
      jacobian->block<1, 3>(row + 0, 0) = -(u * v_12) * scale;
      (*jacobian)(row + 0, 3) = -(u * dphi_12).value() * scale;
    }
    if (nb > 1e-12) {
      const Eigen::RowVector3d u = db.transpose() / nb;
      jacobian->block<1, 3>(row + 1, 4) = -(u * v_13) * scale;
      (*jacobian)(row + 1, 7) = -(u * dphi_13).value() * scale;
    }
    if (nc > 1e-12) {
      const Eigen::RowVector3d u = dc.transpose() / nc;
      jacobian->block<1, 3>(row + 2, 0) = (u * v_12) * scale;
      (*jacobian)(row + 2, 3) = (u * dphi_12).value() * scale;
      jacobian->block<1, 3>(row + 2, 4) = -(u * v_13) * scale;
      (*jacobian)(row + 2, 7) = -(u * dphi_13).value() * scale;
    }
  }
}

inline Eigen::Matrix<double, 8, 1> pack(const Twist& a, const Twist& b) {
  Eigen::Matrix<double, 8, 1> x;
  x << a.rho, a.phi, b.rho, b.phi;
  return x;
}

inline std::pair<Twist, Twist> unpack(const Eigen::Matrix<double, 8, 1>& x) {
  Twist a, b;
  a.rho = x.segment<3>(0);
  a.phi = wrap_pi(x(3));
  b.rho = x.segment<3>(4);
  b.phi = wrap_pi(x(7));
  return {a, b};
}

}  // namespace detail

/// Gradient of inter_prism_cost with respect to the 8 parameters
/// [rho_12, phi_12, rho_13, phi_13], from the analytic Jacobian.
inline Eigen::Matrix<double, 8, 1> inter_prism_cost_gradient(
    const Twist& xi_12, const Twist& xi_13, const SyncedTrajectories& synced,
    const InterPrismDistances& delta) {
  Eigen::VectorXd r;
  Eigen::MatrixXd jac;
  detail::inter_prism_residuals(xi_12, xi_13, synced, delta, r, &jac);
  return 2.0 * jac.transpose() * r;
}

struct InterPrismOptions {
  int max_iterations = 200;
  double step_tol = 1e-10;       ///< converged when |step| drops below
  double cost_rel_tol = 1e-12;   ///< ... or relative cost change does
  double lambda_init = 1e-4;
  double lambda_up = 10.0;
  double lambda_down = 0.1;
  double lambda_min = 1e-12;
};

/// Damped (Levenberg-Marquardt) iterative least squares over the two
/// yaw-constrained twists on the 3n residuals of the inter-prism cost.
/// Steps are only accepted when they reduce the cost.  Non-convergence is
/// reported through `converged`, not an exception; NaN residuals are a hard
/// error.  A result obtained this way carries validation = unvalidated until
/// a prior search has vouched for it.
inline CalibrationResult inter_prism_calibrate(
    const SyncedTrajectories& synced, const InterPrismDistances& delta,
    const std::pair<Twist, Twist>& prior, const InterPrismOptions& opt = {}) {
  if (synced.size() < 10)
    throw ConfigError("inter_prism_calibrate: need >= 10 synchronized samples");
  delta.require_valid();
  if (!prior.first.valid() || !prior.second.valid())
    throw ConfigError("inter_prism_calibrate: non-finite prior");

  Eigen::Matrix<double, 8, 1> x = detail::pack(prior.first, prior.second);
  Eigen::VectorXd r;
  Eigen::MatrixXd jac;
  auto [xi_a, xi_b] = detail::unpack(x);
  detail::inter_prism_residuals(xi_a, xi_b, synced, delta, r, &jac);
  if (!r.allFinite())
    throw SolverError("inter_prism_calibrate: NaN residuals at the prior");
  double cost = r.squaredNorm();

  CalibrationResult result;
  result.method = "inter_prism";
  result.validation = Validation::unvalidated;
  result.cost_history.push_back(cost);

  double lambda = opt.lambda_init;
  bool converged = false;
  int accepted = 0;
  for (int iter = 0; iter < opt.max_iterations && !converged; ++iter) {
    const Eigen::Matrix<double, 8, 8> jtj = jac.transpose() * jac;
    const Eigen::Matrix<double, 8, 1> jtr = jac.transpose() * r;
    Eigen::Matrix<double, 8, 8> damped = jtj;
    for (int i = 0; i < 8; ++i)
      damped(i, i) += lambda * std::max(jtj(i, i), 1e-12);
    const Eigen::Matrix<double, 8, 1> step = damped.ldlt().solve(-jtr);
    if (!step.allFinite())
      throw SolverError("inter_prism_calibrate: singular normal equations");
    if (step.norm() < opt.step_tol) {
      converged = true;
      break;
    }

    const Eigen::Matrix<double, 8, 1> x_new = x + step;
    auto [cand_a, cand_b] = detail::unpack(x_new);
    Eigen::VectorXd r_new;
    Eigen::MatrixXd jac_new;
    detail::inter_prism_residuals(cand_a, cand_b, synced, delta, r_new,
                                  &jac_new);
    if (!r_new.allFinite())
      throw SolverError("inter_prism_calibrate: NaN residuals during solve");
    const double cost_new = r_new.squaredNorm();

    if (cost_new < cost) {
      const double rel_change = (cost - cost_new) / std::max(cost, 1e-300);
      x = detail::pack(cand_a, cand_b);
      r.swap(r_new);
      jac.swap(jac_new);
      cost = cost_new;
      ++accepted;
      result.cost_history.push_back(cost);
      lambda = std::max(lambda * opt.lambda_down, opt.lambda_min);
      if (rel_change < opt.cost_rel_tol) converged = true;
    } else {
      lambda *= opt.lambda_up;
      if (lambda > 1e16) break;  // stuck; report non-convergence
    }
  }

  auto [xi_12, xi_13] = detail::unpack(x);
  result.t_12 = exp_map(xi_12, station_frame(2), station_frame(1));
  result.t_13 = exp_map(xi_13, station_frame(3), station_frame(1));
  result.final_cost_m2 = cost;
  result.iterations = accepted;
  result.converged = converged;
  result.residuals_m.reserve(3 * synced.size());
  const double unscale = std::sqrt(3.0 * static_cast<double>(synced.size()));
  for (Eigen::Index i = 0; i < r.size(); ++i)
    result.residuals_m.push_back(std::abs(r(i)) * unscale);
  return result;
}

// ---------------------------------------------------------------------------
// Search of prior
// ---------------------------------------------------------------------------

/// Per-point speeds from central finite differences (one-sided at the ends).
inline std::vector<double> point_speeds(const Trajectory& traj) {
  const std::size_t n = traj.size();
  if (n < 2) throw ConfigError("point_speeds: need >= 2 points");
  std::vector<double> speeds(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i == 0 ? 0 : i - 1;
    const std::size_t hi = i + 1 == n ? i : i + 1;
    const double dt = traj.times_s[hi] - traj.times_s[lo];
    speeds[i] = (traj.points[hi] - traj.points[lo]).norm() / dt;
  }
  return speeds;
}

/// Speeds on a synchronized set: computed per station within each segment
/// (differences never straddle an outage) and reduced with max over the
/// three stations, so a sample counts as quasi-static only when every
/// station agrees.
inline std::vector<double> synced_point_speeds(const SyncedTrajectories& synced) {
  std::vector<double> speeds(synced.size(), 0.0);
  for (std::size_t k = 0; k < synced.segment_start.size(); ++k) {
    const std::size_t begin = synced.segment_start[k];
    const std::size_t end = synced.segment_end(k);
    if (end - begin < 2) continue;  // isolated sample; counts as static
    for (int s = 0; s < 3; ++s) {
      Trajectory seg;
      seg.times_s.assign(synced.times_s.begin() + static_cast<std::ptrdiff_t>(begin),
                         synced.times_s.begin() + static_cast<std::ptrdiff_t>(end));
      seg.points.assign(synced.positions[s].begin() + static_cast<std::ptrdiff_t>(begin),
                        synced.positions[s].begin() + static_cast<std::ptrdiff_t>(end));
      const std::vector<double> v = point_speeds(seg);
      for (std::size_t i = 0; i < v.size(); ++i)
        speeds[begin + i] = std::max(speeds[begin + i], v[i]);
    }
  }
  return speeds;
}

struct SearchOptions {
  double tau_v_start_mps = 0.01;  ///< first speed threshold
  double tau_v_step_mps = 0.10;   ///< sweep increment
  double validation_trans_m = 0.05;
  double validation_rot_rad = deg_to_rad(0.5);
  int min_similar = 3;            ///< convergences needed to validate a step
  std::size_t min_points = 10;    ///< smallest usable subset
  /// Data whose station-1 samples spread less than this are treated as a
  /// single static blob: distances alone cannot pin the yaws down.
  double min_spread_m = 1.0;
};

struct SweepEntry {
  double tau_v_mps = 0.0;
  std::size_t n_points = 0;
  Twist xi_12, xi_13;
  double cost_m2 = 0.0;
  double metric_median_m = 0.0;  ///< inter-prism metric on the full data
  bool converged = false;
  int iterations = 0;
};

struct PriorSearchDiagnostics {
  std::vector<SweepEntry> step1;
  std::vector<SweepEntry> step2;
  std::size_t best_step1 = 0;
  std::size_t best_step2 = 0;
  int similar_step1 = 0;  ///< entries near best_step1 within step 1
  int similar_step2 = 0;  ///< entries near best_step2 within step 2
  std::size_t effective_subset_count = 0;  ///< distinct subset sizes in sweep
  double data_spread_m = 0.0;  ///< RMS radius of station-1 samples
  bool tau_v_start_raised = false;
  double tau_v_first_mps = 0.0;
  Validation validation = Validation::unvalidated;
  std::string note;
};

namespace detail {

inline std::vector<std::size_t> indices_below(const std::vector<double>& speeds,
                                              double tau_v) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < speeds.size(); ++i)
    if (speeds[i] <= tau_v) idx.push_back(i);
  return idx;
}

/// Initial prior: align quasi-static synchronized samples across stations as
/// if the three prisms were co-located (valid to within the inter-prism
/// distances, which are small against the station distances).
inline std::pair<Twist, Twist> colocation_prior(const SyncedTrajectories& sub) {
  std::pair<Twist, Twist> prior;
  try {
    const RigidTransform t12 = point_to_point_align(
        sub.positions[0], sub.positions[1], /*yaw_only=*/true);
    const RigidTransform t13 = point_to_point_align(
        sub.positions[0], sub.positions[2], /*yaw_only=*/true);
    prior.first = log_map(t12);
    prior.second = log_map(t13);
  } catch (const DegenerateError&) {
    // A single static spot constrains translation but not yaw; fall back to
    // the translation between centroids with zero yaw.
    auto centroid = [](const std::vector<Eigen::Vector3d>& pts) {
      Eigen::Vector3d c = Eigen::Vector3d::Zero();
      for (const auto& p : pts) c += p;
      return Eigen::Vector3d(c / static_cast<double>(pts.size()));
    };
    const Eigen::Vector3d c1 = centroid(sub.positions[0]);
    prior.first.rho = c1 - centroid(sub.positions[1]);
    prior.second.rho = c1 - centroid(sub.positions[2]);
    prior.first.phi = prior.second.phi = 0.0;
  }
  return prior;
}

inline bool entries_similar(const SweepEntry& a, const SweepEntry& b,
                            const SearchOptions& opt) {
  const auto [dt12, dr12] = transform_delta(exp_map(a.xi_12), exp_map(b.xi_12));
  const auto [dt13, dr13] = transform_delta(exp_map(a.xi_13), exp_map(b.xi_13));
  return dt12 <= opt.validation_trans_m && dr12 <= opt.validation_rot_rad &&
         dt13 <= opt.validation_trans_m && dr13 <= opt.validation_rot_rad;
}

}  // namespace detail

/// Two-step velocity-thresholded sweep that finds an initialization for the
/// inter-prism minimization and judges how trustworthy its convergence is.
///
/// Step 1 sweeps tau_v from tau_v_start in tau_v_step increments up to the
/// platform's top speed, running the solver on the samples at or below each
/// threshold and seeding every run with the preceding threshold's estimate
/// (the very first run is seeded by a co-location alignment of the
/// synchronized trajectories).  Step 2 repeats the sweep with every run
/// seeded by step 1's best entry.  Entries are ranked by the inter-prism
/// metric evaluated on the full data; ties go to the smaller tau_v (the less
/// noisy subset).  The result is validated when, in each step, at least
/// `min_similar` other convergences land within the validation thresholds of
/// that step's best: under-constrained data lets step 1's chained estimates
/// drift apart, which is exactly what this test catches.
inline std::pair<std::pair<Twist, Twist>, PriorSearchDiagnostics> search_prior(
    const SyncedTrajectories& synced, const InterPrismDistances& delta,
    double robot_speed_max_mps, const SearchOptions& opt = {},
    const InterPrismOptions& solver_opt = {}) {
  delta.require_valid();
  if (synced.size() < opt.min_points)
    throw ConfigError("search_prior: too few synchronized samples");
  if (robot_speed_max_mps <= 0.0)
    throw ConfigError("search_prior: robot_speed_max must be > 0");

  const std::vector<double> speeds = synced_point_speeds(synced);

  PriorSearchDiagnostics diag;
  {
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (const auto& p : synced.positions[0]) mean += p;
    mean /= static_cast<double>(synced.size());
    double acc = 0.0;
    for (const auto& p : synced.positions[0]) acc += (p - mean).squaredNorm();
    diag.data_spread_m = std::sqrt(acc / static_cast<double>(synced.size()));
  }

  // Threshold ladder; raise the start if the static subset is too small.
  double tau_first = opt.tau_v_start_mps;
  while (detail::indices_below(speeds, tau_first).size() < opt.min_points) {
    tau_first += opt.tau_v_step_mps;
    diag.tau_v_start_raised = true;
    if (tau_first > robot_speed_max_mps + opt.tau_v_step_mps) {
      // Even the full set is too slow-poor; use everything in one entry.
      tau_first = *std::max_element(speeds.begin(), speeds.end());
      break;
    }
  }
  diag.tau_v_first_mps = tau_first;
  std::vector<double> ladder;
  for (double v = tau_first; v <= robot_speed_max_mps + 1e-12;
       v += opt.tau_v_step_mps)
    ladder.push_back(v);
  if (ladder.empty()) ladder.push_back(tau_first);

  const auto run_sweep = [&](const std::pair<Twist, Twist>& first_prior,
                             bool reseed_each) {
    std::vector<SweepEntry> entries;
    std::pair<Twist, Twist> prior = first_prior;
    for (double tau_v : ladder) {
      const std::vector<std::size_t> idx = detail::indices_below(speeds, tau_v);
      if (idx.size() < opt.min_points) continue;
      const SyncedTrajectories sub = synced.subset(idx);
      const CalibrationResult fit =
          inter_prism_calibrate(sub, delta, prior, solver_opt);
      SweepEntry e;
      e.tau_v_mps = tau_v;
      e.n_points = idx.size();
      e.xi_12 = log_map(fit.t_12);
      e.xi_13 = log_map(fit.t_13);
      e.cost_m2 = fit.final_cost_m2;
      e.converged = fit.converged;
      e.iterations = fit.iterations;
      e.metric_median_m =
          inter_prism_metric(synced, fit.t_12, fit.t_13, delta).median_m;
      entries.push_back(e);
      if (!reseed_each) prior = {e.xi_12, e.xi_13};
    }
    return entries;
  };

  const auto best_of = [](const std::vector<SweepEntry>& entries) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < entries.size(); ++i)
      if (entries[i].metric_median_m < entries[best].metric_median_m) best = i;
    return best;  // ties keep the earlier (smaller tau_v) entry
  };

  // Step 1: chained priors starting from the co-location alignment of the
  // whole synchronized data (a one-spot static subset cannot pin the yaws).
  diag.step1 = run_sweep(detail::colocation_prior(synced),
                         /*reseed_each=*/false);
  if (diag.step1.empty())
    throw SolverError("search_prior: no usable sweep entries");
  diag.best_step1 = best_of(diag.step1);

  // Step 2: every run seeded with step 1's best convergence.
  const SweepEntry& seed = diag.step1[diag.best_step1];
  diag.step2 = run_sweep({seed.xi_12, seed.xi_13}, /*reseed_each=*/true);
  diag.best_step2 = best_of(diag.step2);

  const SweepEntry& best = diag.step2[diag.best_step2];
  const auto count_similar = [&](const std::vector<SweepEntry>& entries,
                                 std::size_t best_idx) {
    int count = 0;
    for (std::size_t i = 0; i < entries.size(); ++i)
      if (i != best_idx &&
          detail::entries_similar(entries[i], entries[best_idx], opt))
        ++count;
    return count;
  };
  diag.similar_step1 = count_similar(diag.step1, diag.best_step1);
  diag.similar_step2 = count_similar(diag.step2, diag.best_step2);

  std::vector<std::size_t> sizes;
  for (const auto& e : diag.step2) sizes.push_back(e.n_points);
  std::sort(sizes.begin(), sizes.end());
  diag.effective_subset_count = static_cast<std::size_t>(
      std::unique(sizes.begin(), sizes.end()) - sizes.begin());

  if (diag.effective_subset_count <= 1 ||
      diag.data_spread_m < opt.min_spread_m) {
    diag.validation = Validation::degenerate;
    diag.note = diag.data_spread_m < opt.min_spread_m
                    ? "insufficient motion: station-1 samples spread " +
                          std::to_string(diag.data_spread_m) +
                          " m; the distance constraints cannot pin the yaws"
                    : "insufficient sweep diversity: every speed threshold "
                      "selects the same samples";
  } else if (diag.similar_step1 >= opt.min_similar &&
             diag.similar_step2 >= opt.min_similar) {
    diag.validation = Validation::validated;
  } else {
    diag.validation = Validation::unvalidated;
    diag.note = "similar convergences: step 1 has " +
                std::to_string(diag.similar_step1) + ", step 2 has " +
                std::to_string(diag.similar_step2) + " (need " +
                std::to_string(opt.min_similar) + " in each)";
  }
  return {{best.xi_12, best.xi_13}, diag};
}

/// Method D driver: prior search, then a final solve on the full data seeded
/// with the best convergence.  The result carries the search's validation
/// verdict.
inline std::pair<CalibrationResult, PriorSearchDiagnostics>
calibrate_inter_prism_auto(const SyncedTrajectories& synced,
                           const InterPrismDistances& delta,
                           double robot_speed_max_mps,
                           const SearchOptions& opt = {},
                           const InterPrismOptions& solver_opt = {}) {
  auto [prior, diag] =
      search_prior(synced, delta, robot_speed_max_mps, opt, solver_opt);
  CalibrationResult result =
      inter_prism_calibrate(synced, delta, prior, solver_opt);
  result.validation = diag.validation;
  return {std::move(result), std::move(diag)};
}

}  // namespace rtscal
