#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "rtscal/errors.hpp"
#include "rtscal/preprocess.hpp"
#include "rtscal/se3.hpp"
#include "rtscal/types.hpp"

namespace rtscal {

// ---------------------------------------------------------------------------
// Order statistics
// ---------------------------------------------------------------------------
//
// Median: middle element for odd counts, mean of the two middle elements for
// even counts.  Quartiles: inclusive (Tukey) method -- the data are split at
// the median, with the median element itself included in both halves when the
// count is odd; Q1/Q3 are the medians of the halves.  IQR = Q3 - Q1.

inline double median_of_sorted(const std::vector<double>& x, std::size_t first,
                               std::size_t last) {
  const std::size_t n = last - first;
  if (n == 0) throw ConfigError("median of empty range");
  const std::size_t mid = first + n / 2;
  if (n % 2 == 1) return x[mid];
  return 0.5 * (x[mid - 1] + x[mid]);
}

inline double median(std::vector<double> x) {
  std::sort(x.begin(), x.end());
  return median_of_sorted(x, 0, x.size());
}

/// Interquartile range by the inclusive method.
inline double iqr(std::vector<double> x) {
  if (x.size() < 2) return 0.0;
  std::sort(x.begin(), x.end());
  const std::size_t n = x.size();
  const std::size_t half = n / 2;
  // Odd count: both halves include the median element.
  const double q1 = median_of_sorted(x, 0, n % 2 == 1 ? half + 1 : half);
  const double q3 = median_of_sorted(x, half, n);
  return q3 - q1;
}

// ---------------------------------------------------------------------------
// Metric reports
// ---------------------------------------------------------------------------

struct MetricReport {
  std::string metric;            ///< "gcp" or "inter_prism"
  std::vector<double> samples_m; ///< raw residual distances, >= 0
  double median_m = 0.0;
  double iqr_m = 0.0;
  std::size_t count = 0;
  std::size_t skipped = 0;       ///< GCPs dropped for missing observations

  static MetricReport from_samples(std::string tag,
                                   std::vector<double> samples,
                                   std::size_t skipped = 0) {
    if (samples.empty())
      throw SolverError("metric '" + tag + "': no samples to aggregate");
    MetricReport r;
    r.metric = std::move(tag);
    r.median_m = median(samples);
    r.iqr_m = iqr(samples);
    r.count = samples.size();
    r.skipped = skipped;
    r.samples_m = std::move(samples);
    return r;
  }
};

/// GCP metric: for every control point observed by all three stations (inputs
/// already transformed into one common frame), the three pairwise distances
/// among its observations; median/IQR over all 3n values.  Points missing
/// from any station are skipped and counted.
inline MetricReport gcp_metric(const std::array<GcpSet, 3>& common_frame_sets) {
  std::vector<double> samples;
  std::size_t skipped = 0;
  for (const auto& g : common_frame_sets[0].points) {
    const GcpObservation* o2 = common_frame_sets[1].find(g.label);
    const GcpObservation* o3 = common_frame_sets[2].find(g.label);
    if (o2 == nullptr || o3 == nullptr) {
      ++skipped;
      continue;
    }
    samples.push_back((g.position - o2->position).norm());
    samples.push_back((g.position - o3->position).norm());
    samples.push_back((o2->position - o3->position).norm());
  }
  return MetricReport::from_samples("gcp", std::move(samples), skipped);
}

/// Inter-prism metric: the absolute residuals between the apparent and the
/// premeasured inter-prism distances under candidate transforms, 3 per
/// synchronized sample; median/IQR over all 3n values.
inline MetricReport inter_prism_metric(const SyncedTrajectories& synced,
                                       const RigidTransform& t_12,
                                       const RigidTransform& t_13,
                                       const InterPrismDistances& delta) {
  delta.require_valid();
  std::vector<double> samples;
  samples.reserve(3 * synced.size());
  for (std::size_t j = 0; j < synced.size(); ++j) {
    const Eigen::Vector3d q1 = synced.positions[0][j];
    const Eigen::Vector3d q2 = t_12 * synced.positions[1][j];
    const Eigen::Vector3d q3 = t_13 * synced.positions[2][j];
    samples.push_back(std::abs((q1 - q2).norm() - delta.alpha_m));
    samples.push_back(std::abs((q1 - q3).norm() - delta.beta_m));
    samples.push_back(std::abs((q2 - q3).norm() - delta.gamma_m));
  }
  return MetricReport::from_samples("inter_prism", std::move(samples));
}

}  // namespace rtscal
