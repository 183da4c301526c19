#pragma once

#include <optional>
#include <span>

#include "mcpa/problem.hpp"

namespace mcpa {

/// Orthonormal basis of the tangent plane at a unit direction f:
/// J_f^T J_f = I_2 and J_f^T f = 0.
struct NullSpaceBasis {
  Eigen::Matrix<double, 3, 2> J_f;
};

/// Deterministic Householder tangent basis (no SVD).
NullSpaceBasis null_space(const Vec3& f);

struct TriangulationResult {
  Vec3 point = Vec3::Zero();
  /// Rays whose tangent covariance was singular and fell back to identity
  /// weight (SOT only).
  int identity_weight_fallbacks = 0;
};

/// Geometric least squares: minimizes the sum of squared Euclidean distances
/// of the body-frame point R X + t to every ray. Closed-form 3x3 solve; empty
/// when the system's condition number exceeds 1e12.
std::optional<TriangulationResult> triangulate_midpoint(const Track& track,
                                                        std::span<const Pose> poses);

/// Statistically optimal closed form: minimizes tangent-space Mahalanobis
/// distances weighted by each ray's propagated direction covariance. Reduces
/// to the geometric solution under identity tangent weights.
std::optional<TriangulationResult> triangulate_sot(const Track& track,
                                                   std::span<const Pose> poses);

/// Same solvers restricted to an explicit subset of observations.
std::optional<TriangulationResult> triangulate_midpoint(const Track& track,
                                                        std::span<const Pose> poses,
                                                        std::span<const int> subset);
std::optional<TriangulationResult> triangulate_sot(const Track& track,
                                                   std::span<const Pose> poses,
                                                   std::span<const int> subset);

}  // namespace mcpa
