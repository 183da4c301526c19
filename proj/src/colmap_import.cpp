#include <Eigen/Geometry>
#include <fstream>
#include <map>
#include <sstream>

#include "mcpa/problem_io.hpp"

namespace mcpa {

namespace {

struct ColmapImage {
  Pose world_to_cam;  // X_cam = R X_world + t
  int colmap_camera_id = -1;
  std::string name;
  std::vector<Vec2> points2d;
  std::vector<long long> point3d_ids;
};

[[noreturn]] void fail(const std::string& file, int line, const std::string& message) {
  throw ParseError(file + ":" + std::to_string(line) + ": " + message);
}

// Lines starting with '#' are comments in all three files.
bool next_data_line(std::istream& in, std::string& line, int& line_number) {
  while (std::getline(in, line)) {
    ++line_number;
    std::size_t start = line.find_first_not_of(" \t\r");
    if (start == std::string::npos) continue;
    if (line[start] == '#') continue;
    return true;
  }
  return false;
}

Rotation quaternion_to_rotation(double w, double x, double y, double z) {
  Eigen::Quaterniond q(w, x, y, z);
  q.normalize();
  return q.toRotationMatrix();
}

void parse_cameras(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  std::string line;
  int line_number = 0;
  while (next_data_line(in, line, line_number)) {
    std::istringstream ss(line);
    long long camera_id;
    std::string model;
    long long width, height;
    if (!(ss >> camera_id >> model >> width >> height))
      fail(path, line_number, "expected CAMERA_ID MODEL WIDTH HEIGHT PARAMS[]");
    double param;
    int n_params = 0;
    while (ss >> param) ++n_params;
    if (n_params == 0) fail(path, line_number, "camera has no parameters");
  }
}

std::map<long long, ColmapImage> parse_images(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  std::map<long long, ColmapImage> images;
  std::string line;
  int line_number = 0;
  while (next_data_line(in, line, line_number)) {
    std::istringstream ss(line);
    long long image_id;
    double qw, qx, qy, qz, tx, ty, tz;
    long long camera_id;
    ColmapImage img;
    if (!(ss >> image_id >> qw >> qx >> qy >> qz >> tx >> ty >> tz >> camera_id >> img.name))
      fail(path, line_number, "expected IMAGE_ID QW QX QY QZ TX TY TZ CAMERA_ID NAME");
    img.world_to_cam.R = quaternion_to_rotation(qw, qx, qy, qz);
    img.world_to_cam.t = Vec3(tx, ty, tz);
    img.colmap_camera_id = static_cast<int>(camera_id);

    // Second line: X Y POINT3D_ID triplets (may be empty).
    if (!std::getline(in, line)) fail(path, line_number, "missing 2D point line for image");
    ++line_number;
    std::istringstream pts(line);
    std::vector<std::string> tokens;
    std::string tok;
    while (pts >> tok) tokens.push_back(tok);
    if (tokens.size() % 3 != 0) fail(path, line_number, "2D points must be X Y POINT3D_ID triplets");
    for (std::size_t k = 0; k < tokens.size(); k += 3) {
      try {
        img.points2d.emplace_back(std::stod(tokens[k]), std::stod(tokens[k + 1]));
        img.point3d_ids.push_back(std::stoll(tokens[k + 2]));
      } catch (const std::exception&) {
        fail(path, line_number, "malformed 2D point triplet");
      }
    }
    if (!images.emplace(image_id, std::move(img)).second)
      fail(path, line_number, "duplicate image id " + std::to_string(image_id));
  }
  return images;
}

struct ColmapPoint {
  Vec3 xyz;
  std::vector<std::pair<long long, int>> track;  // (image_id, point2d_idx)
};

std::map<long long, ColmapPoint> parse_points3d(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  std::map<long long, ColmapPoint> points;
  std::string line;
  int line_number = 0;
  while (next_data_line(in, line, line_number)) {
    std::istringstream ss(line);
    long long point_id;
    double x, y, z, error;
    int r, g, b;
    if (!(ss >> point_id >> x >> y >> z >> r >> g >> b >> error))
      fail(path, line_number, "expected POINT3D_ID X Y Z R G B ERROR TRACK[]");
    ColmapPoint point;
    point.xyz = Vec3(x, y, z);
    long long image_id;
    long long p2d_idx;
    while (ss >> image_id >> p2d_idx)
      point.track.emplace_back(image_id, static_cast<int>(p2d_idx));
    if (!points.emplace(point_id, std::move(point)).second)
      fail(path, line_number, "duplicate point id " + std::to_string(point_id));
  }
  return points;
}

}  // namespace

Problem import_colmap_text(const std::string& dir, const RigConfig& rig, const RigMap& rig_map) {
  parse_cameras(dir + "/cameras.txt");
  auto images = parse_images(dir + "/images.txt");
  auto points = parse_points3d(dir + "/points3D.txt");

  std::map<std::string, RigMapEntry> by_name;
  for (const auto& [name, entry] : rig_map) {
    if (entry.camera_id < 0 || entry.camera_id >= rig.camera_count())
      throw InconsistentRig("rig map: camera_id out of range for image " + name);
    if (entry.pose_id < 0) throw InconsistentRig("rig map: negative pose_id for image " + name);
    if (!by_name.emplace(name, entry).second)
      throw InconsistentRig("rig map: image " + name + " listed twice");
  }

  // Assign images to rig slots; reject double bookings of (pose, camera).
  std::map<std::pair<int, int>, long long> slot_to_image;
  std::map<long long, RigMapEntry> by_image;
  int n_poses = 0;
  for (const auto& [image_id, img] : images) {
    const auto it = by_name.find(img.name);
    if (it == by_name.end()) continue;  // image outside the rig subset
    const RigMapEntry& entry = it->second;
    if (!slot_to_image.emplace(std::make_pair(entry.pose_id, entry.camera_id), image_id).second)
      throw InconsistentRig("two images mapped to pose " + std::to_string(entry.pose_id) +
                            ", camera " + std::to_string(entry.camera_id));
    by_image[image_id] = entry;
    n_poses = std::max(n_poses, entry.pose_id + 1);
  }
  if (by_image.empty()) throw InconsistentRig("rig map matched no image");

  Problem problem;
  problem.rig = rig;
  problem.poses.assign(n_poses, Pose{});
  // Derive each rig pose from its lowest-camera-id image:
  // X_cam = R_im X_w + t_im and X_cam = R_c^T(R X_w + t - t_c)
  //   =>  R = R_c R_im, t = R_c t_im + t_c.
  std::vector<bool> pose_seen(n_poses, false);
  for (const auto& [slot, image_id] : slot_to_image) {
    if (pose_seen[slot.first]) continue;  // map order: lowest camera_id first
    const Camera& cam = rig.cameras[slot.second];
    const Pose& w2c = images.at(image_id).world_to_cam;
    problem.poses[slot.first].R = cam.extrinsics.R * w2c.R;
    problem.poses[slot.first].t = cam.extrinsics.R * w2c.t + cam.extrinsics.t;
    pose_seen[slot.first] = true;
  }
  for (int p = 0; p < n_poses; ++p)
    if (!pose_seen[p])
      throw InconsistentRig("pose " + std::to_string(p) + " has no mapped image");

  for (const auto& [point_id, point] : points) {
    Track track;
    track.world_hint = point.xyz;
    for (const auto& [image_id, p2d_idx] : point.track) {
      const auto assigned = by_image.find(image_id);
      if (assigned == by_image.end()) continue;
      const auto img_it = images.find(image_id);
      if (img_it == images.end())
        throw ParseError("point " + std::to_string(point_id) + " references unknown image " +
                         std::to_string(image_id));
      const ColmapImage& img = img_it->second;
      if (p2d_idx < 0 || p2d_idx >= static_cast<int>(img.points2d.size()))
        throw ParseError("point " + std::to_string(point_id) +
                         " references out-of-range 2D point in image " + img.name);
      ObservationRay ray = pixel_to_ray(problem.rig, assigned->second.camera_id,
                                        img.points2d[p2d_idx], Mat2::Identity());
      ray.pose_id = assigned->second.pose_id;
      track.observations.push_back(ray);
    }
    if (track.size() >= 2) problem.tracks.push_back(std::move(track));
  }
  return problem;
}

}  // namespace mcpa
