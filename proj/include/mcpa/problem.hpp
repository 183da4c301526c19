#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mcpa/camera.hpp"
#include "mcpa/pose_only.hpp"

namespace mcpa {

/// All observations of one 3D point plus its selected base pair. world_hint
/// carries the generating (or imported) point for synthesis and metrics only;
/// it never enters the pose-only cost.
struct Track {
  std::vector<ObservationRay> observations;
  BasePair base;
  std::optional<Vec3> world_hint;

  int size() const { return static_cast<int>(observations.size()); }
};

enum class SolveMode { MCPA, MCPALR, BaselineBA };

std::string to_string(SolveMode mode);
std::optional<SolveMode> solve_mode_from_string(const std::string& name);

struct SolverSettings {
  int max_iters = 10;
  double lambda_init = 1e-4;
  double lambda_up = 10.0;
  double lambda_down = 10.0;
  double cost_rel_tol = 1e-10;
  double gradient_tol = 1e-10;
};

/// Pose 0 is the gauge anchor and is held fixed by every solver.
struct Problem {
  RigConfig rig;
  std::vector<Pose> poses;
  std::vector<Track> tracks;
  SolveMode mode = SolveMode::MCPA;
  SolverSettings settings;

  // Ground truth, when known (synthetic data); used only for metrics.
  std::vector<Pose> gt_poses;

  int pose_count() const { return static_cast<int>(poses.size()); }
  std::size_t observation_count() const;
};

enum class SolveStatus {
  Converged,
  MaxIterations,
  SmallGradient,
  Stalled,  // ten consecutive rejected steps
  LinearSolveFailure
};

struct IterationRecord {
  int iter = 0;
  double cost = 0.0;
  double lambda = 0.0;
  bool accepted = false;
  double wall_ms = 0.0;
};

struct SolveReport {
  SolveStatus status = SolveStatus::MaxIterations;
  int iterations = 0;
  int accepted_steps = 0;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  double wall_time_s = 0.0;
  /// Occupied-block bytes of the assembled normal equations (6x6 pose blocks,
  /// lower triangle; plus 6x3 cross and 3x3 point blocks for the baseline).
  std::uint64_t hessian_bytes = 0;
  /// Dense upper bound: (6P)^2 doubles for the pose system.
  std::uint64_t hessian_dense_bytes = 0;
  int dropped_tracks = 0;
  std::vector<IterationRecord> trace;
};

}  // namespace mcpa
