#include "mcpa/pose_only.hpp"

#include <Eigen/Geometry>

#include "mcpa/problem.hpp"

namespace mcpa {

int ResidualBlock::pose_blocks(PoseBlock out[3]) const {
  const int ids[3] = {pose_i, pose_l, pose_r};
  const Mat36* jacs[3] = {&jac_i, &jac_l, &jac_r};
  int n = 0;
  for (int k = 0; k < 3; ++k) {
    int slot = -1;
    for (int m = 0; m < n; ++m)
      if (out[m].pose_id == ids[k]) slot = m;
    if (slot < 0) {
      out[n].pose_id = ids[k];
      out[n].jac = *jacs[k];
      ++n;
    } else {
      out[slot].jac += *jacs[k];
    }
  }
  return n;
}

void relative_pose(const Pose& a, const Pose& b, Rotation& R_ab, Vec3& t_ab) {
  R_ab = b.R * a.R.transpose();
  t_ab = b.t - R_ab * a.t;
}

namespace {

// lambda/theta core shared by both scale directions; (R, t) is the relative
// transform from the primary ("left") to the secondary ("right") ray's pose.
std::optional<ScaleResult> scale_core(const ObservationRay& primary,
                                      const ObservationRay& secondary,
                                      const Rotation& R, const Vec3& t) {
  ScaleResult out;
  out.theta = secondary.f.cross(R * primary.f).norm();
  if (out.theta < kDegenerateTheta) return std::nullopt;
  out.lambda = secondary.f.cross(secondary.v - R * primary.v - t).norm();
  out.s = out.lambda / out.theta;
  return out;
}

}  // namespace

std::optional<ScaleResult> scale_left(const ObservationRay& obs_l, const ObservationRay& obs_r,
                                      const Pose& pose_l, const Pose& pose_r) {
  Rotation R_lr = Rotation::Identity();
  Vec3 t_lr = Vec3::Zero();
  if (obs_l.pose_id != obs_r.pose_id) relative_pose(pose_l, pose_r, R_lr, t_lr);
  return scale_core(obs_l, obs_r, R_lr, t_lr);
}

std::optional<ScaleResult> scale_right(const ObservationRay& obs_l, const ObservationRay& obs_r,
                                       const Pose& pose_l, const Pose& pose_r) {
  return scale_left(obs_r, obs_l, pose_r, pose_l);
}

Vec3 reconstruct_from_base(const ObservationRay& obs_l, const Pose& pose_l, double s_l) {
  return pose_l.R.transpose() * (s_l * obs_l.f + obs_l.v - pose_l.t);
}

namespace {

// Shared evaluation of e = Y/|Y| - f_i with Y built from the primary base b1
// and secondary base b2:
//   Y = lambda * R_{b1,i} f_b1 + theta * (R_{b1,i} v_b1 + t_{b1,i} - v_i).
// For the left residual (b1,b2) = (l,r); the right residual swaps them.
std::optional<ResidualBlock> evaluate(const Track& track, int i, int b1, int b2,
                                      std::span<const Pose> poses, bool with_jacobians,
                                      bool swapped_roles) {
  const ObservationRay& obs_i = track.observations[i];
  const ObservationRay& obs_1 = track.observations[b1];
  const ObservationRay& obs_2 = track.observations[b2];
  const Pose& P1 = poses[obs_1.pose_id];
  const Pose& P2 = poses[obs_2.pose_id];
  const Pose& Pi = poses[obs_i.pose_id];

  Rotation R_12 = Rotation::Identity();
  Vec3 t_12 = Vec3::Zero();
  if (obs_1.pose_id != obs_2.pose_id) relative_pose(P1, P2, R_12, t_12);
  const auto scale = scale_core(obs_1, obs_2, R_12, t_12);
  if (!scale) return std::nullopt;
  const double lambda = scale->lambda;
  const double theta = scale->theta;

  Rotation R_1i = Rotation::Identity();
  Vec3 t_1i = Vec3::Zero();
  if (obs_1.pose_id != obs_i.pose_id) relative_pose(P1, Pi, R_1i, t_1i);

  ResidualBlock block;
  const Vec3 rotated_f1 = R_1i * obs_1.f;
  const Vec3 offset = R_1i * obs_1.v + t_1i - obs_i.v;
  block.Y = lambda * rotated_f1 + theta * offset;
  block.e = block.Y.normalized() - obs_i.f;
  block.pose_i = obs_i.pose_id;
  if (swapped_roles) {
    block.pose_l = obs_2.pose_id;
    block.pose_r = obs_1.pose_id;
  } else {
    block.pose_l = obs_1.pose_id;
    block.pose_r = obs_2.pose_id;
  }

  if (with_jacobians) {
    const double y_norm = block.Y.norm();
    const Vec3 n = block.Y / y_norm;
    const Mat3 de_dY = (Mat3::Identity() - n * n.transpose()) / y_norm;

    // Pose of observation i.
    const Vec3 b1_f_world = P1.R.transpose() * obs_1.f;
    const Vec3 b1_tv_world = P1.R.transpose() * (P1.t - obs_1.v);
    Mat36 dY_i;
    dY_i.leftCols<3>() = Pi.R * (theta * skew(b1_tv_world) - lambda * skew(b1_f_world));
    dY_i.rightCols<3>() = theta * Mat3::Identity();

    // Pose of the secondary base. a = t_12 + R_12 v_b1 - v_b2.
    const Vec3 a = t_12 + R_12 * obs_1.v - obs_2.v;
    const Vec3 dlambda_da = -(obs_2.f.cross(obs_2.f.cross(a))) / lambda;
    const Mat3 da_dphi2 = P2.R * skew(b1_tv_world);
    const Vec3 dlambda_dphi2 = da_dphi2.transpose() * dlambda_da;
    const double f2_R12_f1 = obs_2.f.dot(R_12 * obs_1.f);
    const Vec3 dtheta_dphi2 =
        (f2_R12_f1 / theta) * (obs_2.f.transpose() * P2.R * skew(b1_f_world)).transpose();
    Mat36 dY_2;
    dY_2.leftCols<3>() =
        rotated_f1 * dlambda_dphi2.transpose() + offset * dtheta_dphi2.transpose();
    dY_2.rightCols<3>() = rotated_f1 * dlambda_da.transpose();

    // Pose of the primary base, from the operation-halving identities:
    //   dY/dphi_1 = -dY/dphi_2 - dY/dphi_i
    //   dY/dt_1   = -(dY/dt_2) R_12 - theta R_1i.
    Mat36 dY_1;
    dY_1.leftCols<3>() = -dY_2.leftCols<3>() - dY_i.leftCols<3>();
    dY_1.rightCols<3>() = -dY_2.rightCols<3>() * R_12 - theta * R_1i;

    block.jac_i = de_dY * dY_i;
    if (swapped_roles) {
      block.jac_l = de_dY * dY_2;
      block.jac_r = de_dY * dY_1;
    } else {
      block.jac_l = de_dY * dY_1;
      block.jac_r = de_dY * dY_2;
    }
    block.has_jacobians = true;
  }
  return block;
}

}  // namespace

std::optional<ResidualBlock> residual_left(const Track& track, int i,
                                           std::span<const Pose> poses, bool with_jacobians) {
  return evaluate(track, i, track.base.l, track.base.r, poses, with_jacobians, false);
}

std::optional<ResidualBlock> residual_right(const Track& track, int i,
                                            std::span<const Pose> poses, bool with_jacobians) {
  return evaluate(track, i, track.base.r, track.base.l, poses, with_jacobians, true);
}

}  // namespace mcpa
