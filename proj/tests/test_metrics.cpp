#include "rtscal/metrics.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace rtscal;

namespace {

/// Hand-built synchronized set with constant positions.
SyncedTrajectories make_synced(const std::vector<Eigen::Vector3d>& q1,
                               const std::vector<Eigen::Vector3d>& q2,
                               const std::vector<Eigen::Vector3d>& q3) {
  SyncedTrajectories s;
  s.prism_ids = {1, 2, 3};
  for (std::size_t j = 0; j < q1.size(); ++j)
    s.times_s.push_back(0.1 * static_cast<double>(j));
  s.positions[0] = q1;
  s.positions[1] = q2;
  s.positions[2] = q3;
  s.intervals.push_back({0.0, 0.1 * static_cast<double>(q1.size())});
  s.segment_start.push_back(0);
  return s;
}

}  // namespace

TEST(OrderStatistics, MedianOddEven) {
  EXPECT_EQ(median({5.0}), 5.0);
  EXPECT_EQ(median({3.0, 1.0, 2.0}), 2.0);
  EXPECT_EQ(median({4.0, 1.0, 3.0, 2.0}), 2.5);
}

TEST(OrderStatistics, InclusiveQuartiles) {
  // Odd count: the median belongs to both halves.
  EXPECT_EQ(iqr({1, 2, 3, 4, 5, 6, 7, 8, 9}), 4.0);  // Q1=3, Q3=7
  // Even count: clean halves.
  EXPECT_EQ(iqr({1, 2, 3, 4}), 2.0);  // Q1=1.5, Q3=3.5
  EXPECT_EQ(iqr({2.0, 2.0}), 0.0);
}

TEST(GcpMetric, ConsistentTripletsAreZero) {
  std::array<GcpSet, 3> sets;
  for (int s = 0; s < 3; ++s) {
    sets[s].frame_id = "station1";
    sets[s].points = {{"A", {1, 2, 3}}, {"B", {4, 5, 6}}, {"C", {7, 8, 0}}};
  }
  const MetricReport r = gcp_metric(sets);
  EXPECT_EQ(r.count, 9u);
  EXPECT_EQ(r.median_m, 0.0);
  EXPECT_EQ(r.iqr_m, 0.0);
}

TEST(GcpMetric, UniformOffsetGivesOffsetMedian) {
  std::array<GcpSet, 3> sets;
  for (int s = 0; s < 3; ++s)
    sets[s].points = {{"A", {1, 2, 3}}, {"B", {4, 5, 6}}, {"C", {7, 8, 0}},
                      {"D", {0, 0, 1}}};
  for (auto& p : sets[2].points) p.position.x() += 0.010;
  // Every GCP contributes distances {0, 10, 10} mm; median over 3n is 10 mm.
  const MetricReport r = gcp_metric(sets);
  EXPECT_EQ(r.count, 12u);
  EXPECT_NEAR(r.median_m, 0.010, 1e-15);
}

TEST(GcpMetric, MissingObservationSkipsPoint) {
  std::array<GcpSet, 3> sets;
  sets[0].points = {{"A", {0, 0, 0}}, {"B", {1, 0, 0}}};
  sets[1].points = {{"A", {0, 0, 0}}, {"B", {1, 0, 0}}};
  sets[2].points = {{"A", {0, 0, 0}}};
  const MetricReport r = gcp_metric(sets);
  EXPECT_EQ(r.count, 3u);
  EXPECT_EQ(r.skipped, 1u);
}

TEST(GcpMetric, MatchesDirectReimplementation) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::array<GcpSet, 3> sets;
  std::vector<std::string> labels = {"P1", "P2", "P3", "P4", "P5"};
  for (int s = 0; s < 3; ++s)
    for (const auto& l : labels)
      sets[s].points.push_back(
          {l, Eigen::Vector3d(10 * u(rng), 10 * u(rng), u(rng))});

  std::vector<double> expected;
  for (std::size_t k = 0; k < labels.size(); ++k) {
    const Eigen::Vector3d a = sets[0].points[k].position;
    const Eigen::Vector3d b = sets[1].points[k].position;
    const Eigen::Vector3d c = sets[2].points[k].position;
    expected.push_back((a - b).norm());
    expected.push_back((a - c).norm());
    expected.push_back((b - c).norm());
  }
  const MetricReport r = gcp_metric(sets);
  ASSERT_EQ(r.samples_m.size(), expected.size());
  EXPECT_NEAR(r.median_m, median(expected), 1e-12);
  EXPECT_NEAR(r.iqr_m, iqr(expected), 1e-12);
}

TEST(InterPrismMetric, TruthTransformsNoiseFreeAreZero) {
  // Body carries three prisms; stations 2/3 see their prisms in frames
  // displaced by known yaw-only transforms.
  const RigidTransform t_12 = RigidTransform::from_yaw(0.4, {30, -10, 0.2});
  const RigidTransform t_13 = RigidTransform::from_yaw(-1.1, {-25, 40, -0.1});
  const std::array<Eigen::Vector3d, 3> prisms = {
      Eigen::Vector3d(0.5, 0.0, 0.3), Eigen::Vector3d(-0.5, 0.2, 0.4),
      Eigen::Vector3d(0.1, -0.6, 0.5)};
  InterPrismDistances delta;
  delta.alpha_m = (prisms[0] - prisms[1]).norm();
  delta.beta_m = (prisms[0] - prisms[2]).norm();
  delta.gamma_m = (prisms[1] - prisms[2]).norm();

  std::vector<Eigen::Vector3d> q1, q2, q3;
  std::mt19937_64 rng(37);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int j = 0; j < 40; ++j) {
    const Eigen::Vector3d body(u(rng), u(rng), 0.0);
    q1.push_back(body + prisms[0]);
    q2.push_back(t_12.inverse() * (body + prisms[1]));
    q3.push_back(t_13.inverse() * (body + prisms[2]));
  }
  const MetricReport r =
      inter_prism_metric(make_synced(q1, q2, q3), t_12, t_13, delta);
  EXPECT_LT(r.median_m, 1e-12);
  for (double s : r.samples_m) EXPECT_LT(s, 1e-12);
}

TEST(InterPrismMetric, UniformInflationGivesExactMedian) {
  // Static geometry with all apparent distances exactly 1 mm beyond delta.
  const Eigen::Vector3d p1(0, 0, 0), p2(2, 0, 0), p3(0, 3, 0);
  InterPrismDistances delta;
  delta.alpha_m = (p1 - p2).norm() - 0.001;
  delta.beta_m = (p1 - p3).norm() - 0.001;
  delta.gamma_m = (p2 - p3).norm() - 0.001;
  std::vector<Eigen::Vector3d> q1(12, p1), q2(12, p2), q3(12, p3);
  const MetricReport r =
      inter_prism_metric(make_synced(q1, q2, q3), RigidTransform::identity(),
                         RigidTransform::identity(), delta);
  EXPECT_NEAR(r.median_m, 0.001, 1e-15);
  EXPECT_NEAR(r.iqr_m, 0.0, 1e-15);
}

TEST(InterPrismMetric, MatchesDirectReimplementation) {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Eigen::Vector3d> q1, q2, q3;
  for (int j = 0; j < 25; ++j) {
    q1.emplace_back(10 * u(rng), 10 * u(rng), u(rng));
    q2.emplace_back(10 * u(rng), 10 * u(rng), u(rng));
    q3.emplace_back(10 * u(rng), 10 * u(rng), u(rng));
  }
  const RigidTransform t_12 = RigidTransform::from_yaw(0.2, {5, 1, 0});
  const RigidTransform t_13 = RigidTransform::from_yaw(-0.7, {-3, 2, 0});
  InterPrismDistances delta{1.0, 1.2, 0.9};
  const MetricReport r =
      inter_prism_metric(make_synced(q1, q2, q3), t_12, t_13, delta);

  std::vector<double> expected;
  for (int j = 0; j < 25; ++j) {
    const Eigen::Vector3d a = t_12.rotation * q2[static_cast<std::size_t>(j)] +
                              t_12.translation;
    const Eigen::Vector3d b = t_13.rotation * q3[static_cast<std::size_t>(j)] +
                              t_13.translation;
    expected.push_back(std::abs((q1[static_cast<std::size_t>(j)] - a).norm() -
                                delta.alpha_m));
    expected.push_back(std::abs((q1[static_cast<std::size_t>(j)] - b).norm() -
                                delta.beta_m));
    expected.push_back(std::abs((a - b).norm() - delta.gamma_m));
  }
  ASSERT_EQ(r.samples_m.size(), expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i)
    EXPECT_NEAR(r.samples_m[i], expected[i], 1e-12);
  EXPECT_NEAR(r.median_m, median(expected), 1e-12);
  EXPECT_NEAR(r.iqr_m, iqr(expected), 1e-12);
}

TEST(Metrics, GaugeInvarianceUnderCommonYawTransform) {
  std::mt19937_64 rng(43);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const RigidTransform gauge =
      RigidTransform::from_yaw(0.9, {100.0, -50.0, 3.0});

  // GCP metric.
  std::array<GcpSet, 3> sets, moved;
  for (int s = 0; s < 3; ++s)
    for (int k = 0; k < 4; ++k) {
      const Eigen::Vector3d p(20 * u(rng), 20 * u(rng), u(rng));
      sets[s].points.push_back({"G" + std::to_string(k), p});
      moved[s].points.push_back({"G" + std::to_string(k), gauge * p});
    }
  EXPECT_NEAR(gcp_metric(sets).median_m, gcp_metric(moved).median_m, 1e-12);
  EXPECT_NEAR(gcp_metric(sets).iqr_m, gcp_metric(moved).iqr_m, 1e-12);

  // Inter-prism metric: station-1 points and both transforms move by the
  // gauge; station-2/3 points stay in their own frames.
  std::vector<Eigen::Vector3d> q1, q2, q3, q1_moved;
  for (int j = 0; j < 20; ++j) {
    q1.emplace_back(10 * u(rng), 10 * u(rng), u(rng));
    q2.emplace_back(10 * u(rng), 10 * u(rng), u(rng));
    q3.emplace_back(10 * u(rng), 10 * u(rng), u(rng));
    q1_moved.push_back(gauge * q1.back());
  }
  const RigidTransform t_12 = RigidTransform::from_yaw(0.2, {5, 1, 0});
  const RigidTransform t_13 = RigidTransform::from_yaw(-0.7, {-3, 2, 0});
  InterPrismDistances delta{1.0, 1.2, 0.9};
  const MetricReport a =
      inter_prism_metric(make_synced(q1, q2, q3), t_12, t_13, delta);
  const MetricReport b = inter_prism_metric(make_synced(q1_moved, q2, q3),
                                            gauge * t_12, gauge * t_13, delta);
  EXPECT_NEAR(a.median_m, b.median_m, 1e-12);
  EXPECT_NEAR(a.iqr_m, b.iqr_m, 1e-12);
}

TEST(Metrics, EmptySamplesThrow) {
  std::array<GcpSet, 3> sets;
  sets[0].points = {{"A", {0, 0, 0}}};
  EXPECT_THROW(gcp_metric(sets), SolverError);
}
