#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "mcpa/problem.hpp"

namespace mcpa {

enum class RigPreset { Forward, Omni };
enum class TrajectoryKind { Linear, Curve };

std::optional<RigPreset> rig_preset_from_string(const std::string& name);
std::optional<TrajectoryKind> trajectory_from_string(const std::string& name);

/// Parameters of one synthetic experiment instance.
struct SynthSpec {
  RigPreset rig_preset = RigPreset::Forward;
  TrajectoryKind trajectory = TrajectoryKind::Linear;
  int n_poses = 50;
  int n_points = 1000;
  double sigma_max = 0.0;       // pixels; per-observation sigma ~ U(0, sigma_max)
  double rot_perturb_deg = 2.0;
  double trans_perturb_m = 0.5;
  std::uint64_t seed = 0;
  double linear_step_m = 2.0;   // spacing of linear trajectories
  double curve_radius_m = 100.0;
  double scene_half_extent_m = 500.0;
};

/// Four pinhole cameras, f = 540 px, 1080x960. Forward: side by side along
/// body-x, 0.5 m spacing, all optical axes +z. Omni: on a 0.5 m square, axes
/// +z, +x, -z, -x.
RigConfig make_rig(RigPreset preset);

/// Linear: equal steps along world-x with identity rotations. Curve: equal
/// angle samples on a circle, yaw tangent to it.
std::vector<Pose> make_trajectory(TrajectoryKind kind, int n_poses, double linear_step_m = 2.0,
                                  double curve_radius_m = 100.0);

struct SynthResult {
  Problem problem;                         // perturbed initial poses, noisy pixels
  std::vector<Pose> gt_poses;              // also stored in problem.gt_poses
  std::vector<Vec3> gt_points;             // per retained track (== world_hint)
};

/// Deterministic in spec.seed. Points with fewer than two visible
/// observations are dropped, not resampled. Pose 0 is the gauge anchor and is
/// not perturbed. Throws std::runtime_error when no track survives.
SynthResult generate_problem(const SynthSpec& spec);

}  // namespace mcpa
