#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mcpa/geometry.hpp"

namespace mcpa {

struct CameraIntrinsics {
  double fx = 1.0, fy = 1.0;
  double cx = 0.0, cy = 0.0;
  int width = 0, height = 0;
};

/// Camera-to-body transform: X_body = R_c * X_cam + t_c.
struct CameraExtrinsics {
  Rotation R = Rotation::Identity();
  Vec3 t = Vec3::Zero();
};

struct Camera {
  CameraIntrinsics intrinsics;
  CameraExtrinsics extrinsics;
};

/// Calibrated multi-camera rig; extrinsics are constants, never optimized.
struct RigConfig {
  std::vector<Camera> cameras;

  int camera_count() const { return static_cast<int>(cameras.size()); }
};

/// 6D observation ray of the generalized camera: unit direction f and vertex
/// v, both in the body frame. sigma_f is the direction covariance (rank <= 2,
/// f in its null space). The source pixel and its covariance are kept so the
/// ray can be regenerated and reprojection residuals evaluated.
struct ObservationRay {
  Vec3 f = Vec3::UnitZ();
  Vec3 v = Vec3::Zero();
  Mat3 sigma_f = Mat3::Zero();
  int pose_id = -1;
  int camera_id = -1;
  Vec2 pixel = Vec2::Zero();
  Mat2 sigma_px = Mat2::Zero();
};

struct Projection {
  Vec2 pixel;
  bool in_image = false;  // outside bounds is reported, not fatal
};

/// Pinhole projection of a world point through rig camera `cam` at `pose`.
/// Empty when the camera-frame depth is at or below 1e-9 m.
std::optional<Projection> project(const RigConfig& rig, int cam, const Pose& pose,
                                  const Vec3& x_world);

/// Back-projects a pixel into a body-frame observation ray with covariance
/// propagated from sigma_px. pose_id is left for the caller to fill.
ObservationRay pixel_to_ray(const RigConfig& rig, int cam, const Vec2& pixel,
                            const Mat2& sigma_px);

/// sigma_f = J sigma_px J^T with J the 3x2 derivative of the unit-normalized
/// body-frame direction with respect to the pixel.
Mat3 propagate_ray_covariance(const RigConfig& rig, int cam, const Vec2& pixel,
                              const Mat2& sigma_px);

/// Camera-frame depth of a world point (z before projection).
double camera_depth(const RigConfig& rig, int cam, const Pose& pose, const Vec3& x_world);

RigConfig rig_from_json_string(const std::string& text);
std::string rig_to_json_string(const RigConfig& rig);
RigConfig load_rig(const std::string& path);
void save_rig(const RigConfig& rig, const std::string& path);

}  // namespace mcpa
