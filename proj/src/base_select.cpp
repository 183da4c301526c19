#include "mcpa/base_select.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "mcpa/rng.hpp"

namespace mcpa {

namespace {

using Mat24 = Eigen::Matrix<double, 2, 4>;
using Mat23 = Eigen::Matrix<double, 2, 3>;
using Mat4 = Eigen::Matrix4d;
using Vec4 = Eigen::Vector4d;

// First two rows of [v]x.
Mat23 k_rows(const Vec3& v) {
  Mat23 k;
  k << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x();
  return k;
}

Eigen::Matrix<double, 3, 4> ray_projection(const ObservationRay& obs, const Pose& pose) {
  Eigen::Matrix<double, 3, 4> p;
  p.leftCols<3>() = pose.R;
  p.col(3) = pose.t - obs.v;
  return p;
}

}  // namespace

double average_variance(const Mat3& sigma_f) { return sigma_f.trace() / 3.0; }

double roundness(const Mat3& cov_X) {
  if (cov_X.trace() < 1e-30) return 1.0;  // exact point: perfectly isotropic
  Eigen::SelfAdjointEigenSolver<Mat3> eig(cov_X, Eigen::EigenvaluesOnly);
  const double lo = std::max(eig.eigenvalues()(0), 0.0);
  const double hi = eig.eigenvalues()(2);
  return std::sqrt(lo / hi);
}

std::optional<PairUncertainty> pair_point_and_covariance(const ObservationRay& obs_i,
                                                         const ObservationRay& obs_j,
                                                         const Pose& pose_i,
                                                         const Pose& pose_j) {
  const Eigen::Matrix<double, 3, 4> P_i = ray_projection(obs_i, pose_i);
  const Eigen::Matrix<double, 3, 4> P_j = ray_projection(obs_j, pose_j);

  Mat4 design;
  design.topRows<2>() = k_rows(obs_i.f) * P_i;
  design.bottomRows<2>() = k_rows(obs_j.f) * P_j;

  Eigen::JacobiSVD<Mat4> svd(design, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (sv(2) - sv(3) < 1e-10) return std::nullopt;  // direction ambiguous
  Vec4 Xh = svd.matrixV().col(3);
  if (std::abs(Xh(3)) < 1e-12) return std::nullopt;  // point at infinity
  // Canonical sign: positive homogeneous component.
  if (Xh(3) < 0.0) Xh = -Xh;

  PairUncertainty out;
  out.X_hat = Xh.head<3>() / Xh(3);

  const double sigma_trace = obs_i.sigma_f.trace() + obs_j.sigma_f.trace();
  if (sigma_trace < 1e-30) {
    out.cov_X = Mat3::Zero();
    out.roundness = 1.0;
    return out;
  }

  // Gauss-Helmert covariance of the homogeneous solution, constraints
  //   g = design * Xh = 0 (observations enter through f), h = |Xh| - 1 = 0.
  const Mat4& E = design;
  const Mat23 F_i = k_rows(P_i * Xh);
  const Mat23 F_j = k_rows(P_j * Xh);
  Mat2 M_i = F_i * obs_i.sigma_f * F_i.transpose();
  Mat2 M_j = F_j * obs_j.sigma_f * F_j.transpose();
  const double det_i = M_i.determinant();
  const double det_j = M_j.determinant();
  if (!(std::isfinite(det_i) && std::isfinite(det_j)) || det_i <= 1e-300 || det_j <= 1e-300)
    return std::nullopt;  // singular weight: pair unusable for scoring

  Mat4 W = Mat4::Zero();  // (F sigma_l F^T)^-1, block diagonal
  W.topLeftCorner<2, 2>() = M_i.inverse();
  W.bottomRightCorner<2, 2>() = M_j.inverse();

  const Mat4 N = E.transpose() * W * E;
  const Vec4& H = Xh;
  // Sigma = N^-1 - N^-1 H (H^T N^-1 H)^-1 H^T N^-1 is the top-left block of
  // the inverse of the bordered system [[N, H], [H^T, 0]]. The bordered form
  // also covers the exact-geometry case where N is rank 3 with null vector H.
  Eigen::Matrix<double, 5, 5> bordered = Eigen::Matrix<double, 5, 5>::Zero();
  bordered.topLeftCorner<4, 4>() = N;
  bordered.topRightCorner<4, 1>() = H;
  bordered.bottomLeftCorner<1, 4>() = H.transpose();
  const Eigen::FullPivLU<Eigen::Matrix<double, 5, 5>> lu(bordered);
  if (!lu.isInvertible()) return std::nullopt;
  const Mat4 cov_Xh = lu.inverse().topLeftCorner<4, 4>();

  Eigen::Matrix<double, 3, 4> dehom;
  dehom.leftCols<3>() = Mat3::Identity();
  dehom.col(3) = -out.X_hat;
  dehom /= Xh(3);
  out.cov_X = dehom * cov_Xh * dehom.transpose();
  out.cov_X = 0.5 * (out.cov_X + out.cov_X.transpose());  // enforce symmetry
  out.roundness = roundness(out.cov_X);
  return out;
}

namespace {

double pair_theta(const Track& track, int a, int b, std::span<const Pose> poses) {
  const ObservationRay& oa = track.observations[a];
  const ObservationRay& ob = track.observations[b];
  Rotation R_ab = Rotation::Identity();
  Vec3 t_ab = Vec3::Zero();
  if (oa.pose_id != ob.pose_id) relative_pose(poses[oa.pose_id], poses[ob.pose_id], R_ab, t_ab);
  return ob.f.cross(R_ab * oa.f).norm();
}

// Angle between the two rays' directions in the world frame.
double pair_disparity(const Track& track, int a, int b, std::span<const Pose> poses) {
  const ObservationRay& oa = track.observations[a];
  const ObservationRay& ob = track.observations[b];
  const Vec3 da = poses[oa.pose_id].R.transpose() * oa.f;
  const Vec3 db = poses[ob.pose_id].R.transpose() * ob.f;
  return std::acos(std::clamp(da.dot(db), -1.0, 1.0));
}

bool pair_usable(const Track& track, int a, int b, std::span<const Pose> poses) {
  const auto s = scale_left(track.observations[a], track.observations[b],
                            poses[track.observations[a].pose_id],
                            poses[track.observations[b].pose_id]);
  return s.has_value();
}

std::optional<BasePair> best_pair(const Track& track, std::span<const Pose> poses,
                                  double (*score)(const Track&, int, int,
                                                  std::span<const Pose>)) {
  const int n = track.size();
  BasePair best;
  double best_score = -1.0;
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      if (!pair_usable(track, a, b, poses)) continue;
      const double s = score(track, a, b, poses);
      if (s > best_score) {
        best_score = s;
        best = {a, b};
      }
    }
  }
  if (!best.valid()) return std::nullopt;
  return best;
}

}  // namespace

std::optional<BasePair> select_bases(const Track& track, std::span<const Pose> poses) {
  const int n = track.size();
  if (n < 2) return std::nullopt;

  // Phase 1: minimum average variance; ties (including the all-equal case of
  // missing covariances) resolve to the first observation.
  int left = 0;
  double best_var = average_variance(track.observations[0].sigma_f);
  for (int i = 1; i < n; ++i) {
    const double var = average_variance(track.observations[i].sigma_f);
    if (var < best_var) {
      best_var = var;
      left = i;
    }
  }

  // Phase 2: maximum roundness among observations with usable parallax.
  int right = -1;
  double best_roundness = -1.0;
  for (int i = 0; i < n; ++i) {
    if (i == left) continue;
    if (!pair_usable(track, left, i, poses)) continue;
    const auto pu = pair_point_and_covariance(track.observations[left], track.observations[i],
                                              poses[track.observations[left].pose_id],
                                              poses[track.observations[i].pose_id]);
    const double score = pu ? pu->roundness : 0.0;  // ill-conditioned pairs score 0
    if (score > best_roundness) {
      best_roundness = score;
      right = i;
    }
  }
  if (right < 0) return std::nullopt;
  return BasePair{left, right};
}

std::optional<BasePair> select_bases(const Track& track, std::span<const Pose> poses,
                                     BaseStrategy strategy, std::uint64_t random_key) {
  const int n = track.size();
  if (n < 2) return std::nullopt;
  switch (strategy) {
    case BaseStrategy::Roundness:
      return select_bases(track, poses);
    case BaseStrategy::MaxTheta:
      return best_pair(track, poses, pair_theta);
    case BaseStrategy::MaxDisparity:
      return best_pair(track, poses, pair_disparity);
    case BaseStrategy::Random: {
      const CounterRng rng(random_key, 5);
      // Try a bounded number of draws, then fall back to the first usable pair.
      for (std::uint64_t k = 0; k < 64; ++k) {
        const int a = static_cast<int>(rng.below(2 * k, n));
        const int b = static_cast<int>(rng.below(2 * k + 1, n));
        if (a != b && pair_usable(track, a, b, poses))
          return BasePair{std::min(a, b), std::max(a, b)};
      }
      [[fallthrough]];
    }
    case BaseStrategy::First:
      for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b)
          if (pair_usable(track, a, b, poses)) return BasePair{a, b};
      return std::nullopt;
  }
  return std::nullopt;
}

std::optional<BaseStrategy> base_strategy_from_string(const std::string& name) {
  if (name == "roundness") return BaseStrategy::Roundness;
  if (name == "max-theta") return BaseStrategy::MaxTheta;
  if (name == "max-disparity") return BaseStrategy::MaxDisparity;
  if (name == "random") return BaseStrategy::Random;
  if (name == "first") return BaseStrategy::First;
  return std::nullopt;
}

std::string to_string(BaseStrategy strategy) {
  switch (strategy) {
    case BaseStrategy::Roundness: return "roundness";
    case BaseStrategy::MaxTheta: return "max-theta";
    case BaseStrategy::MaxDisparity: return "max-disparity";
    case BaseStrategy::Random: return "random";
    case BaseStrategy::First: return "first";
  }
  return "roundness";
}

}  // namespace mcpa
