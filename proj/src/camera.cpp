#include "mcpa/camera.hpp"

#include <fstream>
#include <stdexcept>

#include "json_io.hpp"

namespace mcpa {

namespace {
constexpr double kMinDepth = 1e-9;

// Camera-frame direction of a pixel, before normalization.
Vec3 pixel_direction(const CameraIntrinsics& k, const Vec2& pixel) {
  return {(pixel.x() - k.cx) / k.fx, (pixel.y() - k.cy) / k.fy, 1.0};
}
}  // namespace

double camera_depth(const RigConfig& rig, int cam, const Pose& pose, const Vec3& x_world) {
  const Camera& c = rig.cameras.at(cam);
  const Vec3 x_cam = c.extrinsics.R.transpose() * (pose.to_body(x_world) - c.extrinsics.t);
  return x_cam.z();
}

std::optional<Projection> project(const RigConfig& rig, int cam, const Pose& pose,
                                  const Vec3& x_world) {
  const Camera& c = rig.cameras.at(cam);
  const Vec3 x_cam = c.extrinsics.R.transpose() * (pose.to_body(x_world) - c.extrinsics.t);
  if (x_cam.z() <= kMinDepth) return std::nullopt;
  const CameraIntrinsics& k = c.intrinsics;
  Projection p;
  p.pixel = {k.fx * x_cam.x() / x_cam.z() + k.cx, k.fy * x_cam.y() / x_cam.z() + k.cy};
  p.in_image = p.pixel.x() >= 0.0 && p.pixel.x() <= k.width &&
               p.pixel.y() >= 0.0 && p.pixel.y() <= k.height;
  return p;
}

Mat3 propagate_ray_covariance(const RigConfig& rig, int cam, const Vec2& pixel,
                              const Mat2& sigma_px) {
  const Camera& c = rig.cameras.at(cam);
  const CameraIntrinsics& k = c.intrinsics;
  const Vec3 g = pixel_direction(k, pixel);
  const double norm = g.norm();
  const Vec3 n = g / norm;
  // d(g)/d(pixel), then through unit normalization: (I - n n^T)/|g|.
  Eigen::Matrix<double, 3, 2> dg;
  dg << 1.0 / k.fx, 0.0,
        0.0, 1.0 / k.fy,
        0.0, 0.0;
  const Eigen::Matrix<double, 3, 2> j_cam = (Mat3::Identity() - n * n.transpose()) / norm * dg;
  const Eigen::Matrix<double, 3, 2> j = c.extrinsics.R * j_cam;
  return j * sigma_px * j.transpose();
}

ObservationRay pixel_to_ray(const RigConfig& rig, int cam, const Vec2& pixel,
                            const Mat2& sigma_px) {
  const Camera& c = rig.cameras.at(cam);
  ObservationRay ray;
  ray.f = (c.extrinsics.R * pixel_direction(c.intrinsics, pixel)).normalized();
  ray.v = c.extrinsics.t;
  ray.sigma_f = propagate_ray_covariance(rig, cam, pixel, sigma_px);
  ray.camera_id = cam;
  ray.pixel = pixel;
  ray.sigma_px = sigma_px;
  return ray;
}

namespace {

nlohmann::ordered_json camera_to_json(const Camera& c) {
  nlohmann::ordered_json j;
  j["fx"] = c.intrinsics.fx;
  j["fy"] = c.intrinsics.fy;
  j["cx"] = c.intrinsics.cx;
  j["cy"] = c.intrinsics.cy;
  j["width"] = c.intrinsics.width;
  j["height"] = c.intrinsics.height;
  std::vector<double> r(9);
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) r[3 * i + k] = c.extrinsics.R(i, k);
  j["R"] = r;
  j["t"] = std::vector<double>{c.extrinsics.t.x(), c.extrinsics.t.y(), c.extrinsics.t.z()};
  return j;
}

Camera camera_from_json(const nlohmann::json& j) {
  Camera c;
  c.intrinsics.fx = j.at("fx").get<double>();
  c.intrinsics.fy = j.at("fy").get<double>();
  c.intrinsics.cx = j.at("cx").get<double>();
  c.intrinsics.cy = j.at("cy").get<double>();
  c.intrinsics.width = j.at("width").get<int>();
  c.intrinsics.height = j.at("height").get<int>();
  const auto r = j.at("R").get<std::vector<double>>();
  const auto t = j.at("t").get<std::vector<double>>();
  if (r.size() != 9 || t.size() != 3)
    throw std::runtime_error("rig camera: R must have 9 entries and t 3");
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) c.extrinsics.R(i, k) = r[3 * i + k];
  c.extrinsics.t = Vec3(t[0], t[1], t[2]);
  if (c.intrinsics.fx <= 0.0 || c.intrinsics.fy <= 0.0)
    throw std::runtime_error("rig camera: focal lengths must be positive");
  return c;
}

}  // namespace

nlohmann::ordered_json rig_to_json(const RigConfig& rig) {
  nlohmann::ordered_json j;
  j["cameras"] = nlohmann::ordered_json::array();
  for (const Camera& c : rig.cameras) j["cameras"].push_back(camera_to_json(c));
  return j;
}

RigConfig rig_from_json(const nlohmann::json& j) {
  RigConfig rig;
  for (const auto& jc : j.at("cameras")) rig.cameras.push_back(camera_from_json(jc));
  if (rig.cameras.empty()) throw std::runtime_error("rig: needs at least one camera");
  return rig;
}

RigConfig rig_from_json_string(const std::string& text) {
  return rig_from_json(nlohmann::json::parse(text));
}

std::string rig_to_json_string(const RigConfig& rig) { return rig_to_json(rig).dump(2) + "\n"; }

RigConfig load_rig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open rig file: " + path);
  return rig_from_json(nlohmann::json::parse(in));
}

void save_rig(const RigConfig& rig, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write rig file: " + path);
  out << rig_to_json_string(rig);
}

}  // namespace mcpa
