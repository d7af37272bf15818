#pragma once

// Shared scene builders for the solver and acceptance tests.

#include <array>
#include <cstdint>
#include <vector>

#include "rtscal/preprocess.hpp"
#include "rtscal/simulate.hpp"

namespace testing_scenes {

using namespace rtscal;

/// Synchronized trajectories built directly from ground truth (no noise, no
/// interpolation): station i's exact view of its prism at the given grid.
inline SyncedTrajectories exact_synced(const SceneConfig& cfg, double t0,
                                       double t1, double rate_hz) {
  const ScenePath path(cfg);
  const std::array<RigidTransform, 3> world_from_station = {
      cfg.world_from_station1, cfg.world_from_station1 * cfg.t_12,
      cfg.world_from_station1 * cfg.t_13};
  SyncedTrajectories out;
  out.prism_ids = {1, 2, 3};
  out.intervals.push_back({t0, t1});
  out.segment_start.push_back(0);
  const double h = 1.0 / rate_hz;
  for (double t = t0; t <= t1 + 1e-12; t += h) {
    out.times_s.push_back(t);
    for (int s = 0; s < 3; ++s) {
      const int prism = cfg.shared_prism ? 0 : s;
      out.positions[static_cast<std::size_t>(s)].push_back(
          world_from_station[static_cast<std::size_t>(s)].inverse() *
          path.prism_world(prism, t));
    }
  }
  return out;
}

/// Figure-eight scene with a static lead-in, paper-grade noise, and a seed.
inline SceneConfig noisy_figure_eight(std::uint64_t seed,
                                      double duration_s = 120.0) {
  SceneConfig cfg;
  cfg.kind = TrajectoryKind::figure_eight;
  cfg.duration_s = duration_s;
  cfg.static_lead_s = 10.0;
  cfg.seed = seed;
  return cfg;
}

/// Four surveyed pillars around the working area.
inline std::vector<GcpObservation> four_pillars() {
  return {{"P1", {-30.0, 20.0, 1.2}},
          {"P2", {35.0, 140.0, 0.8}},
          {"P3", {60.0, 55.0, 1.5}},
          {"P4", {-45.0, 120.0, 1.0}}};
}

}  // namespace testing_scenes
