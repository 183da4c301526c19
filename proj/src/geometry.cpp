#include "mcpa/geometry.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace mcpa {

namespace {
constexpr double kSmallAngle = 1e-8;
}

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
      -v.y(), v.x(), 0.0;
  return m;
}

Rotation exp_so3(const Vec3& phi) {
  const double theta2 = phi.squaredNorm();
  const Mat3 K = skew(phi);
  double a, b;  // R = I + a*K + b*K^2
  if (theta2 < kSmallAngle * kSmallAngle) {
    a = 1.0 - theta2 / 6.0;
    b = 0.5 - theta2 / 24.0;
  } else {
    const double theta = std::sqrt(theta2);
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta2;
  }
  return Mat3::Identity() + a * K + b * K * K;
}

Vec3 log_so3(const Rotation& R) {
  const double cos_theta = std::clamp((R.trace() - 1.0) * 0.5, -1.0, 1.0);
  const double theta = std::acos(cos_theta);
  const Vec3 w(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));
  if (theta < kSmallAngle) {
    return 0.5 * w;  // first-order: R ~ I + [phi]x
  }
  if (theta > M_PI - 1e-4) {
    // Near pi the off-diagonal difference vanishes and acos loses precision;
    // recover the axis from the symmetric part and the angle from |w| = 2 sin.
    const Mat3 S = 0.5 * (R + Mat3::Identity());
    int k;
    S.diagonal().maxCoeff(&k);
    Vec3 axis = S.col(k) / std::sqrt(S(k, k));
    axis.normalize();
    if (w.dot(axis) < 0.0) axis = -axis;
    const double refined = M_PI - std::asin(std::clamp(0.5 * w.norm(), 0.0, 1.0));
    return refined * axis;
  }
  return (theta / (2.0 * std::sin(theta))) * w;
}

Rotation project_to_so3(const Mat3& M) {
  Eigen::JacobiSVD<Mat3> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 R = svd.matrixU() * svd.matrixV().transpose();
  if (R.determinant() < 0.0) {
    Mat3 flip = Mat3::Identity();
    flip(2, 2) = -1.0;
    R = svd.matrixU() * flip * svd.matrixV().transpose();
  }
  return R;
}

Pose apply_right_perturbation(const Pose& p, const Perturbation& d) {
  if (d.phi.isZero() && d.dt.isZero()) return p;
  return {p.R * exp_so3(d.phi), p.t + d.dt};
}

}  // namespace mcpa
