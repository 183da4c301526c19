#pragma once

#include <Eigen/Core>
#include <optional>
#include <span>
#include <vector>

#include "mcpa/base_select.hpp"
#include "mcpa/problem.hpp"

namespace mcpa {

/// Serial keeps the reference single-pass loop; Parallel runs the same
/// accumulation across tracks with OpenMP and a deterministic per-thread
/// combine. Results agree to floating-point reassociation.
enum class ExecutionPolicy { Serial, Parallel };

/// Worker count used by Parallel kernels: min(OpenMP max, MCPA_THREADS).
int thread_count();

struct NormalEquations {
  Eigen::MatrixXd H;  // 6P x 6P, gauge block clamped to identity
  Eigen::VectorXd g;  // -J^T e, gauge rows zero
  double cost = 0.0;
  int dropped_residuals = 0;
  /// Occupied 6x6 pose blocks (lower triangle, counted before gauge clamp).
  std::uint64_t block_bytes = 0;
  std::uint64_t dense_bytes = 0;
};

/// Sum of squared pose-only residuals for the problem's mode (BaselineBA mode
/// evaluates the reprojection cost instead).
double build_cost(const Problem& problem, std::span<const Pose> poses,
                  ExecutionPolicy policy = ExecutionPolicy::Parallel,
                  int* dropped_residuals = nullptr);
double build_cost(const Problem& problem);

/// Gauss-Newton normal equations H = J^T J, g = -J^T e of the pose-only cost.
NormalEquations build_normal_equations(const Problem& problem, std::span<const Pose> poses,
                                       ExecutionPolicy policy = ExecutionPolicy::Parallel);
NormalEquations build_normal_equations(const Problem& problem);

/// Levenberg-Marquardt over poses only (modes MCPA / MCPALR).
SolveReport lm_solve(Problem& problem, ExecutionPolicy policy = ExecutionPolicy::Parallel);

/// Joint pose + point bundle adjustment (MultiCol-style reprojection cost)
/// with Schur elimination of the point blocks. Points are initialized by
/// geometric triangulation at the initial poses unless supplied.
SolveReport baseline_ba_solve(Problem& problem,
                              std::vector<std::optional<Vec3>>* points_out = nullptr,
                              ExecutionPolicy policy = ExecutionPolicy::Parallel);

/// Per-track point estimates at the given poses (empty where triangulation
/// fails). Used after pose adjustment and to initialize the baseline.
std::vector<std::optional<Vec3>> triangulate_all(const Problem& problem,
                                                 std::span<const Pose> poses, bool use_sot,
                                                 ExecutionPolicy policy = ExecutionPolicy::Parallel);

struct FinalizeStats {
  int kept = 0;
  int too_few_observations = 0;
  int no_valid_pair = 0;
  int negative_depth = 0;
};

/// Selects base observations for every track at the problem's current poses,
/// enforces positive depth of the implied point along every observation, and
/// removes tracks that fail. Must run before the pose-only solvers.
FinalizeStats finalize_tracks(Problem& problem,
                              BaseStrategy strategy = BaseStrategy::Roundness,
                              std::uint64_t seed = 0);

struct Metrics {
  double rot_err_rad = 0.0;     // mean arccos((trace(R_gt R^T) - 1)/2)
  double trans_err_rel = 0.0;   // mean |t_gt - t| / |t_gt|
  double trans_err_abs_m = 0.0; // mean |t_gt - t|
  double reproj_err_px = 0.0;   // mean pixel distance using est points
  double recon_err_m = 0.0;     // mean |X_est - X_gt|
  int excluded_translations = 0;  // poses with |t_gt| < 1e-12
  int compared_points = 0;
};

/// Pose lists must be gauge-aligned (pose 0 identical). Point spans align
/// with problem.tracks; entries without both estimate and ground truth are
/// skipped.
Metrics error_metrics(std::span<const Pose> est_poses, std::span<const Pose> gt_poses,
                      std::span<const std::optional<Vec3>> est_points,
                      std::span<const std::optional<Vec3>> gt_points, const Problem& problem);

}  // namespace mcpa
