#include "mcpa/triangulate.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <numeric>
#include <vector>

namespace mcpa {

namespace {
constexpr double kMaxCondition = 1e12;

double condition_number(const Mat3& A) {
  Eigen::JacobiSVD<Mat3> svd(A);
  const double smin = svd.singularValues()(2);
  if (smin <= 0.0) return std::numeric_limits<double>::infinity();
  return svd.singularValues()(0) / smin;
}

std::vector<int> all_indices(int n) {
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

}  // namespace

NullSpaceBasis null_space(const Vec3& f) {
  // Householder vector mapping f onto -sign(f_z) e_z; the reflector's first
  // two columns are then an orthonormal basis orthogonal to f.
  Vec3 u = f;
  const double s = f.z() >= 0.0 ? 1.0 : -1.0;
  u.z() += s;
  const Mat3 Q = Mat3::Identity() - (2.0 / u.squaredNorm()) * (u * u.transpose());
  NullSpaceBasis basis;
  basis.J_f.col(0) = Q.col(0);
  basis.J_f.col(1) = Q.col(1);
  return basis;
}

std::optional<TriangulationResult> triangulate_midpoint(const Track& track,
                                                        std::span<const Pose> poses,
                                                        std::span<const int> subset) {
  if (subset.size() < 2) return std::nullopt;
  Mat3 A = Mat3::Zero();
  Vec3 b = Vec3::Zero();
  for (const int k : subset) {
    const ObservationRay& obs = track.observations[k];
    const Pose& pose = poses[obs.pose_id];
    const Mat3 proj = Mat3::Identity() - obs.f * obs.f.transpose();
    A += pose.R.transpose() * proj * pose.R;
    b += pose.R.transpose() * proj * (obs.v - pose.t);
  }
  if (condition_number(A) > kMaxCondition) return std::nullopt;
  TriangulationResult out;
  out.point = A.ldlt().solve(b);
  return out;
}

std::optional<TriangulationResult> triangulate_sot(const Track& track,
                                                   std::span<const Pose> poses,
                                                   std::span<const int> subset) {
  if (subset.size() < 2) return std::nullopt;
  Mat3 A = Mat3::Zero();
  Vec3 B = Vec3::Zero();
  TriangulationResult out;
  for (const int k : subset) {
    const ObservationRay& obs = track.observations[k];
    const Pose& pose = poses[obs.pose_id];
    const auto J_f = null_space(obs.f).J_f;
    Mat2 weight = Mat2::Identity();
    const Mat2 sigma_e = J_f.transpose() * obs.sigma_f * J_f;
    if (sigma_e.determinant() >= 1e-30) {
      weight = sigma_e.inverse();
    } else {
      ++out.identity_weight_fallbacks;
    }
    const Eigen::Matrix<double, 2, 3> A_i = J_f.transpose() * pose.R;
    const Vec2 B_i = J_f.transpose() * (pose.t - obs.v);
    A += A_i.transpose() * weight * A_i;
    B += A_i.transpose() * weight * B_i;
  }
  if (condition_number(A) > kMaxCondition) return std::nullopt;
  out.point = -A.ldlt().solve(B);
  return out;
}

std::optional<TriangulationResult> triangulate_midpoint(const Track& track,
                                                        std::span<const Pose> poses) {
  const auto idx = all_indices(track.size());
  return triangulate_midpoint(track, poses, idx);
}

std::optional<TriangulationResult> triangulate_sot(const Track& track,
                                                   std::span<const Pose> poses) {
  const auto idx = all_indices(track.size());
  return triangulate_sot(track, poses, idx);
}

}  // namespace mcpa
