#pragma once

#include <optional>
#include <span>
#include <string>

#include "mcpa/problem.hpp"

namespace mcpa {

/// Two-ray point estimate with its Gauss-Helmert covariance. roundness is
/// sqrt(lambda_min/lambda_max) of cov_X, in [0, 1]; 1 for an exact point.
struct PairUncertainty {
  Vec3 X_hat = Vec3::Zero();
  Mat3 cov_X = Mat3::Zero();
  double roundness = 0.0;
};

/// trace(sigma_f) / 3.
double average_variance(const Mat3& sigma_f);

/// sqrt(min/max eigenvalue) of a PSD matrix; 1 when trace < 1e-30.
double roundness(const Mat3& cov_X);

/// Unit-norm least-squares intersection of two rays plus first-order
/// covariance of the dehomogenized point. Empty when the stacked system is
/// direction-ambiguous (two smallest singular values within 1e-10) or the
/// point is at infinity, or when a propagated weight block is singular.
std::optional<PairUncertainty> pair_point_and_covariance(const ObservationRay& obs_i,
                                                         const ObservationRay& obs_j,
                                                         const Pose& pose_i,
                                                         const Pose& pose_j);

enum class BaseStrategy { Roundness, MaxTheta, MaxDisparity, Random, First };

std::optional<BaseStrategy> base_strategy_from_string(const std::string& name);
std::string to_string(BaseStrategy strategy);

/// Two-phase selection: left base by minimum average direction variance, then
/// right base by maximum uncertainty-ellipsoid roundness among observations
/// with usable parallax. Ties break toward the lowest index. Empty when no
/// pairing has usable parallax.
std::optional<BasePair> select_bases(const Track& track, std::span<const Pose> poses);

/// Alternative strategies used for the comparison experiment.
std::optional<BasePair> select_bases(const Track& track, std::span<const Pose> poses,
                                     BaseStrategy strategy, std::uint64_t random_key = 0);

}  // namespace mcpa
