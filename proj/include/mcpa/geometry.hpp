#pragma once

#include <Eigen/Dense>

namespace mcpa {

using Mat3 = Eigen::Matrix3d;
using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

/// Rotation matrices are plain 3x3 doubles; every function producing one
/// guarantees orthonormality with det +1.
using Rotation = Mat3;

/// Rigid transform of the rig body, convention X_body = R * X_world + t.
struct Pose {
  Rotation R = Rotation::Identity();
  Vec3 t = Vec3::Zero();

  Vec3 to_body(const Vec3& x_world) const { return R * x_world + t; }
  Vec3 to_world(const Vec3& x_body) const { return R.transpose() * (x_body - t); }

  Pose inverse() const { return {R.transpose(), -(R.transpose() * t)}; }

  /// Composition: (a * b)(x) == a(b(x)).
  Pose operator*(const Pose& rhs) const { return {R * rhs.R, R * rhs.t + t}; }
};

/// Update of one pose in the tangent parameterization: rotation by a right
/// perturbation phi (radians), translation additively by dt (meters).
struct Perturbation {
  Vec3 phi = Vec3::Zero();
  Vec3 dt = Vec3::Zero();
};

/// [v]x such that skew(v) * w == v.cross(w).
Mat3 skew(const Vec3& v);

/// Rodrigues exponential; series expansion below 1e-8 rad.
Rotation exp_so3(const Vec3& phi);

/// Inverse of exp_so3 for angles in [0, pi).
Vec3 log_so3(const Rotation& R);

/// Nearest rotation to an arbitrary 3x3 matrix (polar projection).
Rotation project_to_so3(const Mat3& M);

/// rotation <- R * exp_so3(phi), translation <- t + dt.
Pose apply_right_perturbation(const Pose& p, const Perturbation& d);

}  // namespace mcpa
