#pragma once

#include <optional>
#include <span>

#include "mcpa/camera.hpp"
#include "mcpa/geometry.hpp"

namespace mcpa {

/// Indices (within a track) of the left/right base observations.
struct BasePair {
  int l = -1;
  int r = -1;

  bool valid() const { return l >= 0 && r >= 0 && l != r; }
};

/// Depth of a base observation recovered from a ray pair:
/// s = lambda / theta with
///   lambda = |[f_r]x (v_r - R_lr v_l - t_lr)|,
///   theta  = |[f_r]x R_lr f_l|.
struct ScaleResult {
  double s = 0.0;
  double lambda = 0.0;
  double theta = 0.0;
};

using Mat36 = Eigen::Matrix<double, 3, 6>;

/// One pose-only residual e = Y/|Y| - f_obs and, when requested, the 3x6
/// Jacobian blocks [d/dphi | d/dt] for the observation pose and the two base
/// poses. Blocks are per role; roles sharing a pose_id must have their blocks
/// summed to get the derivative w.r.t. that pose (pose_blocks() does this).
struct ResidualBlock {
  Vec3 e = Vec3::Zero();
  Vec3 Y = Vec3::Zero();
  Mat36 jac_i = Mat36::Zero();
  Mat36 jac_l = Mat36::Zero();
  Mat36 jac_r = Mat36::Zero();
  int pose_i = -1;
  int pose_l = -1;
  int pose_r = -1;
  bool has_jacobians = false;

  /// Jacobians grouped by distinct pose id (role blocks summed).
  struct PoseBlock {
    int pose_id;
    Mat36 jac;
  };
  // At most three distinct poses per residual.
  int pose_blocks(PoseBlock out[3]) const;
};

struct Track;  // defined in problem.hpp

constexpr double kDegenerateTheta = 1e-10;

/// Relative transform a -> b: R_ab = R_b R_a^T, t_ab = t_b - R_b R_a^T t_a,
/// so that X_b = R_ab X_a + t_ab.
void relative_pose(const Pose& a, const Pose& b, Rotation& R_ab, Vec3& t_ab);

/// Depth of the left ray of a pair. When both observations come from the same
/// rig pose (equal pose_id) the relative transform is identity by definition,
/// not recomputed from the poses. Empty on degenerate parallax (theta below
/// kDegenerateTheta).
std::optional<ScaleResult> scale_left(const ObservationRay& obs_l, const ObservationRay& obs_r,
                                      const Pose& pose_l, const Pose& pose_r);

/// Mirror of scale_left with the two roles swapped.
std::optional<ScaleResult> scale_right(const ObservationRay& obs_l, const ObservationRay& obs_r,
                                       const Pose& pose_l, const Pose& pose_r);

/// X_world = R_l^T (s_l f_l + v_l - t_l).
Vec3 reconstruct_from_base(const ObservationRay& obs_l, const Pose& pose_l, double s_l);

/// Residual of observation i predicted from the left base (i != base.l).
std::optional<ResidualBlock> residual_left(const Track& track, int i,
                                           std::span<const Pose> poses,
                                           bool with_jacobians = false);

/// Residual of observation i predicted from the right base (i != base.r).
std::optional<ResidualBlock> residual_right(const Track& track, int i,
                                            std::span<const Pose> poses,
                                            bool with_jacobians = false);

/// residual_left with all Jacobian blocks filled.
inline std::optional<ResidualBlock> residual_jacobians(const Track& track, int i,
                                                       std::span<const Pose> poses) {
  return residual_left(track, i, poses, true);
}

}  // namespace mcpa
