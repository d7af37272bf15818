#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "rtscal/errors.hpp"
#include "rtscal/se3.hpp"
#include "rtscal/types.hpp"

namespace rtscal {

// ---------------------------------------------------------------------------
// Pipeline configuration
// ---------------------------------------------------------------------------

enum class Interpolation { linear, gaussian_process };

/// Exponential quadratic kernel k(t,t') = sigma^2 exp(-(t-t')^2 / (2 l^2))
/// with observation noise sigma_n^2 on the diagonal.  The prior mean is the
/// per-axis sample mean of the support points.
struct GpParams {
  double length_scale_s = 1.0;
  double sigma_m = 1.0;
  double noise_sigma_m = 0.002;
  /// Kernel matrices whose eigenvalue ratio exceeds this are rejected.
  double max_condition = 1e12;
};

/// Thresholds of the four-block pipeline.  Angular rates are radians/second
/// internally; configuration files use degrees/second.
struct PipelineConfig {
  double tau_r_mps = 2.0;                    ///< range-rate threshold
  double tau_e_radps = deg_to_rad(1.0);      ///< elevation-rate threshold
  double tau_a_radps = deg_to_rad(1.0);      ///< azimuth-rate threshold
  double tau_s_s = 1.0;                      ///< max inter-sample gap
  double tau_l_s = 6.0;                      ///< min interval length
  Interpolation interpolation = Interpolation::linear;
  double output_rate_hz = 10.0;
  bool enable_outlier_filter = true;
  bool enable_interval_filter = true;
  GpParams gp;

  void require_valid() const {
    if (!(tau_r_mps > 0.0 && tau_e_radps > 0.0 && tau_a_radps > 0.0 &&
          tau_s_s > 0.0 && tau_l_s > 0.0 && output_rate_hz > 0.0))
      throw ConfigError("pipeline thresholds and output rate must be > 0");
  }
};

/// Half-open-in-spirit time window; end - start must be strictly positive.
struct TimeInterval {
  double start_s = 0.0;
  double end_s = 0.0;

  [[nodiscard]] double duration() const { return end_s - start_s; }
  [[nodiscard]] bool contains(double t) const {
    return t >= start_s && t <= end_s;
  }
};

/// Output of the pipeline: one shared timestamp grid and three per-station
/// position lists aligned index-for-index.  segment_start[k] is the index of
/// the first grid sample belonging to intervals[k]; segments never straddle
/// an outage, so finite differences must not cross segment boundaries.
struct SyncedTrajectories {
  std::vector<double> times_s;
  std::array<std::vector<Eigen::Vector3d>, 3> positions;
  std::vector<TimeInterval> intervals;
  std::vector<std::size_t> segment_start;
  std::array<int, 3> prism_ids = {0, 0, 0};

  [[nodiscard]] std::size_t size() const { return times_s.size(); }

  [[nodiscard]] std::size_t segment_end(std::size_t k) const {
    return k + 1 < segment_start.size() ? segment_start[k + 1] : times_s.size();
  }

  /// Keep only the given (sorted ascending, unique) sample indices.  Segment
  /// structure is preserved; emptied segments disappear.
  [[nodiscard]] SyncedTrajectories subset(
      const std::vector<std::size_t>& indices) const {
    SyncedTrajectories out;
    out.prism_ids = prism_ids;
    std::size_t seg = 0;
    std::ptrdiff_t last_seg = -1;
    for (std::size_t idx : indices) {
      while (seg + 1 < segment_start.size() && idx >= segment_start[seg + 1])
        ++seg;
      if (static_cast<std::ptrdiff_t>(seg) != last_seg) {
        out.intervals.push_back(intervals[seg]);
        out.segment_start.push_back(out.times_s.size());
        last_seg = static_cast<std::ptrdiff_t>(seg);
      }
      out.times_s.push_back(times_s[idx]);
      for (int s = 0; s < 3; ++s) out.positions[s].push_back(positions[s][idx]);
    }
    return out;
  }
};

// ---------------------------------------------------------------------------
// Block 1: outlier filter
// ---------------------------------------------------------------------------

/// Removes measurements whose range, elevation, or azimuth rate relative to
/// the last kept sample exceeds tau_r, tau_e, or tau_a, then converts the
/// survivors to Cartesian coordinates.  Rates use backward differences on the
/// raw timestamps; azimuth differences are wrapped to (-pi, pi].  Comparing
/// against the last *kept* sample makes the filter idempotent and lets it
/// absorb runs of consecutive spikes.
inline std::vector<CartesianPoint> outlier_filter(const MeasurementLog& log,
                                                  const PipelineConfig& cfg) {
  cfg.require_valid();
  if (log.records.size() < 2)
    throw ConfigError("outlier_filter: need at least 2 records");
  std::vector<CartesianPoint> out;
  out.reserve(log.records.size());
  const PolarMeasurement* last = nullptr;
  for (const auto& m : log.records) {
    if (last != nullptr) {
      const double dt = m.time_s - last->time_s;
      if (dt <= 0.0) continue;  // defensive; logs are strictly increasing
      const double range_rate = std::abs(m.range_m - last->range_m) / dt;
      const double elev_rate =
          std::abs(m.elevation_rad - last->elevation_rad) / dt;
      const double azim_rate =
          std::abs(wrap_pi(m.azimuth_rad - last->azimuth_rad)) / dt;
      if (range_rate > cfg.tau_r_mps || elev_rate > cfg.tau_e_radps ||
          azim_rate > cfg.tau_a_radps)
        continue;
    }
    out.push_back(polar_to_cartesian(m));
    last = &m;
  }
  if (out.empty())
    throw SolverError("outlier_filter: no usable measurements left");
  return out;
}

/// Plain conversion used when block 1 is disabled.
inline std::vector<CartesianPoint> to_cartesian(const MeasurementLog& log) {
  std::vector<CartesianPoint> out;
  out.reserve(log.records.size());
  for (const auto& m : log.records) out.push_back(polar_to_cartesian(m));
  return out;
}

// ---------------------------------------------------------------------------
// Block 2: split intervals
// ---------------------------------------------------------------------------

struct IntervalSplit {
  /// Common coverage windows (intersection over the three stations).
  std::vector<TimeInterval> intervals;
  /// support[s][k]: station s's uninterrupted run of samples backing
  /// intervals[k].  The run is a superset of the window so that block 4 can
  /// interpolate right up to the window edges without extrapolating.
  std::array<std::vector<std::vector<CartesianPoint>>, 3> support;
};

namespace detail {

/// Maximal runs of consecutive samples whose inter-sample gap is <= tau_s.
inline std::vector<std::pair<std::size_t, std::size_t>> gap_runs(
    const std::vector<CartesianPoint>& pts, double tau_s) {
  std::vector<std::pair<std::size_t, std::size_t>> runs;  // [first, last]
  if (pts.empty()) return runs;
  std::size_t first = 0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    if (pts[i].time_s - pts[i - 1].time_s > tau_s) {
      runs.emplace_back(first, i - 1);
      first = i;
    }
  }
  runs.emplace_back(first, pts.size() - 1);
  return runs;
}

}  // namespace detail

/// Splits each station's samples at gaps larger than tau_s and keeps the
/// pairwise intersection of the three stations' coverage.  Throws when the
/// stations share no common coverage.
inline IntervalSplit split_intervals(
    const std::array<std::vector<CartesianPoint>, 3>& station_points,
    double tau_s) {
  if (tau_s <= 0.0) throw ConfigError("split_intervals: tau_s must be > 0");
  std::array<std::vector<std::pair<std::size_t, std::size_t>>, 3> runs;
  for (int s = 0; s < 3; ++s)
    runs[s] = detail::gap_runs(station_points[s], tau_s);

  IntervalSplit out;
  for (const auto& r1 : runs[0]) {
    const double a1 = station_points[0][r1.first].time_s;
    const double b1 = station_points[0][r1.second].time_s;
    for (const auto& r2 : runs[1]) {
      const double a2 = station_points[1][r2.first].time_s;
      const double b2 = station_points[1][r2.second].time_s;
      for (const auto& r3 : runs[2]) {
        const double a3 = station_points[2][r3.first].time_s;
        const double b3 = station_points[2][r3.second].time_s;
        const double a = std::max({a1, a2, a3});
        const double b = std::min({b1, b2, b3});
        if (b - a <= 0.0) continue;
        out.intervals.push_back({a, b});
        const std::array<const std::pair<std::size_t, std::size_t>*, 3> rr = {
            &r1, &r2, &r3};
        for (int s = 0; s < 3; ++s) {
          std::vector<CartesianPoint> run_pts(
              station_points[s].begin() + static_cast<std::ptrdiff_t>(rr[s]->first),
              station_points[s].begin() +
                  static_cast<std::ptrdiff_t>(rr[s]->second) + 1);
          out.support[s].push_back(std::move(run_pts));
        }
      }
    }
  }
  if (out.intervals.empty())
    throw SolverError("split_intervals: stations share no common coverage");

  // Sort windows (and their supports) by start time.
  std::vector<std::size_t> order(out.intervals.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return out.intervals[i].start_s < out.intervals[j].start_s;
  });
  IntervalSplit sorted;
  for (std::size_t i : order) {
    sorted.intervals.push_back(out.intervals[i]);
    for (int s = 0; s < 3; ++s)
      sorted.support[s].push_back(std::move(out.support[s][i]));
  }
  return sorted;
}

// ---------------------------------------------------------------------------
// Block 3: filter intervals
// ---------------------------------------------------------------------------

/// Keeps intervals with duration >= tau_l, preserving order.
inline std::vector<TimeInterval> filter_intervals(
    const std::vector<TimeInterval>& intervals, double tau_l) {
  std::vector<TimeInterval> out;
  for (const auto& iv : intervals)
    if (iv.duration() >= tau_l) out.push_back(iv);
  if (out.empty())
    throw SolverError("filter_intervals: no interval is longer than tau_l");
  return out;
}

/// In-place variant over an IntervalSplit, keeping supports aligned.
inline void filter_intervals(IntervalSplit& split, double tau_l) {
  IntervalSplit out;
  for (std::size_t i = 0; i < split.intervals.size(); ++i) {
    if (split.intervals[i].duration() >= tau_l) {
      out.intervals.push_back(split.intervals[i]);
      for (int s = 0; s < 3; ++s)
        out.support[s].push_back(std::move(split.support[s][i]));
    }
  }
  if (out.intervals.empty())
    throw SolverError("filter_intervals: no interval is longer than tau_l");
  split = std::move(out);
}

// ---------------------------------------------------------------------------
// Block 4: interpolation
// ---------------------------------------------------------------------------

/// Piecewise-linear interpolation of each axis at the query times.
/// Queries must lie within the support's time span.
inline Trajectory interpolate_linear(const std::vector<CartesianPoint>& points,
                                     const std::vector<double>& query_times) {
  if (points.size() < 2)
    throw ConfigError("interpolate_linear: need at least 2 support points");
  const double t0 = points.front().time_s;
  const double t1 = points.back().time_s;
  Trajectory out;
  out.frame_id = points.front().frame_id;
  out.times_s = query_times;
  out.points.reserve(query_times.size());
  std::size_t hi = 1;
  for (double t : query_times) {
    if (t < t0 || t > t1)
      throw ConfigError("interpolate_linear: query outside support span");
    while (hi + 1 < points.size() && points[hi].time_s < t) ++hi;
    while (hi > 1 && points[hi - 1].time_s > t) --hi;  // queries may be unsorted
    const auto& a = points[hi - 1];
    const auto& b = points[hi];
    const double w = (t - a.time_s) / (b.time_s - a.time_s);
    out.points.push_back(a.position + w * (b.position - a.position));
  }
  return out;
}

namespace detail {

/// Posterior mean of a 1-D GP regression with exponential quadratic kernel
/// and sample-mean prior.  Columns of `values` are treated as independent
/// outputs sharing the kernel.  Throws SolverError when the kernel matrix
/// condition estimate exceeds params.max_condition.
inline Eigen::MatrixXd gp_posterior_mean(const std::vector<double>& times,
                                         const Eigen::MatrixXd& values,
                                         const std::vector<double>& query_times,
                                         const GpParams& params) {
  const auto n = static_cast<Eigen::Index>(times.size());
  if (n < 2) throw ConfigError("gp_posterior_mean: need >= 2 support points");
  const double s2 = params.sigma_m * params.sigma_m;
  const double inv_2l2 =
      1.0 / (2.0 * params.length_scale_s * params.length_scale_s);

  Eigen::MatrixXd gram(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double d = times[static_cast<std::size_t>(i)] -
                       times[static_cast<std::size_t>(j)];
      const double k = s2 * std::exp(-d * d * inv_2l2);
      gram(i, j) = k;
      gram(j, i) = k;
    }
    gram(i, i) += params.noise_sigma_m * params.noise_sigma_m;
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  const double lmin = eig.eigenvalues().minCoeff();
  const double lmax = eig.eigenvalues().maxCoeff();
  if (!(lmin > 0.0) || lmax / lmin > params.max_condition)
    throw SolverError(
        "gp_posterior_mean: kernel matrix is ill-conditioned; increase "
        "noise_sigma (or shorten the length scale)");

  const Eigen::RowVectorXd mean = values.colwise().mean();
  const Eigen::MatrixXd centered = values.rowwise() - mean;
  const Eigen::MatrixXd alpha = gram.ldlt().solve(centered);

  const auto m = static_cast<Eigen::Index>(query_times.size());
  Eigen::MatrixXd out(m, values.cols());
  Eigen::RowVectorXd kstar(n);
  for (Eigen::Index q = 0; q < m; ++q) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d = query_times[static_cast<std::size_t>(q)] -
                       times[static_cast<std::size_t>(i)];
      kstar(i) = s2 * std::exp(-d * d * inv_2l2);
    }
    out.row(q) = kstar * alpha + mean;
  }
  return out;
}

}  // namespace detail

/// GP posterior-mean interpolation, applied independently per axis.
inline Trajectory interpolate_gp(const std::vector<CartesianPoint>& points,
                                 const std::vector<double>& query_times,
                                 const GpParams& params = {}) {
  if (points.size() < 3)
    throw ConfigError("interpolate_gp: need at least 3 support points");
  const double t0 = points.front().time_s;
  const double t1 = points.back().time_s;
  std::vector<double> times;
  times.reserve(points.size());
  Eigen::MatrixXd values(static_cast<Eigen::Index>(points.size()), 3);
  for (std::size_t i = 0; i < points.size(); ++i) {
    times.push_back(points[i].time_s);
    values.row(static_cast<Eigen::Index>(i)) = points[i].position.transpose();
  }
  for (double t : query_times)
    if (t < t0 || t > t1)
      throw ConfigError("interpolate_gp: query outside support span");

  const Eigen::MatrixXd mean =
      detail::gp_posterior_mean(times, values, query_times, params);
  Trajectory out;
  out.frame_id = points.front().frame_id;
  out.times_s = query_times;
  out.points.reserve(query_times.size());
  for (Eigen::Index q = 0; q < mean.rows(); ++q)
    out.points.emplace_back(mean.row(q).transpose());
  return out;
}

// ---------------------------------------------------------------------------
// Full pipeline
// ---------------------------------------------------------------------------

/// Runs blocks 1 (optional) -> 2 -> 3 (optional) -> 4 on three raw logs and
/// resamples all stations onto a uniform grid at cfg.output_rate_hz, anchored
/// at each surviving interval's start.
inline SyncedTrajectories run_pipeline(const std::array<MeasurementLog, 3>& logs,
                                       const PipelineConfig& cfg) {
  cfg.require_valid();
  std::array<std::vector<CartesianPoint>, 3> pts;
  for (int s = 0; s < 3; ++s)
    pts[s] = cfg.enable_outlier_filter ? outlier_filter(logs[s], cfg)
                                       : to_cartesian(logs[s]);

  IntervalSplit split = split_intervals(pts, cfg.tau_s_s);
  if (cfg.enable_interval_filter) filter_intervals(split, cfg.tau_l_s);

  SyncedTrajectories out;
  for (int s = 0; s < 3; ++s)
    out.prism_ids[s] =
        logs[s].records.empty() ? 0 : logs[s].records.front().prism_id;

  const double h = 1.0 / cfg.output_rate_hz;
  for (std::size_t k = 0; k < split.intervals.size(); ++k) {
    const TimeInterval iv = split.intervals[k];
    std::vector<double> grid;
    const auto steps = static_cast<std::size_t>(
        std::floor(iv.duration() / h * (1.0 + 1e-12)));
    grid.reserve(steps + 1);
    for (std::size_t i = 0; i <= steps; ++i) grid.push_back(iv.start_s + static_cast<double>(i) * h);

    out.intervals.push_back(iv);
    out.segment_start.push_back(out.times_s.size());
    std::array<Trajectory, 3> traj;
    for (int s = 0; s < 3; ++s) {
      traj[s] = cfg.interpolation == Interpolation::linear
                    ? interpolate_linear(split.support[s][k], grid)
                    : interpolate_gp(split.support[s][k], grid, cfg.gp);
    }
    for (std::size_t i = 0; i < grid.size(); ++i) {
      out.times_s.push_back(grid[i]);
      for (int s = 0; s < 3; ++s) out.positions[s].push_back(traj[s].points[i]);
    }
  }
  return out;
}

}  // namespace rtscal
