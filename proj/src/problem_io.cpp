#include "mcpa/problem_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "json_io.hpp"

namespace mcpa {

std::string format_double(double value) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

ordered_json pose_to_json(const Pose& p) {
  ordered_json j;
  std::vector<double> r(9);
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) r[3 * i + k] = p.R(i, k);
  j["R"] = r;
  j["t"] = std::vector<double>{p.t.x(), p.t.y(), p.t.z()};
  return j;
}

Pose pose_from_json(const json& j) {
  const auto r = j.at("R").get<std::vector<double>>();
  const auto t = j.at("t").get<std::vector<double>>();
  if (r.size() != 9 || t.size() != 3) throw ParseError("pose: R needs 9 entries, t needs 3");
  Pose p;
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) p.R(i, k) = r[3 * i + k];
  p.t = Vec3(t[0], t[1], t[2]);
  return p;
}

ordered_json observation_to_json(const ObservationRay& obs) {
  ordered_json j;
  j["pose_id"] = obs.pose_id;
  j["camera_id"] = obs.camera_id;
  j["u"] = obs.pixel.x();
  j["v"] = obs.pixel.y();
  j["sigma_px"] = std::vector<double>{obs.sigma_px(0, 0), obs.sigma_px(0, 1),
                                      obs.sigma_px(1, 0), obs.sigma_px(1, 1)};
  return j;
}

}  // namespace

std::string problem_to_json_string(const Problem& problem) {
  ordered_json j;
  j["version"] = kProblemVersion;
  j["mode"] = to_string(problem.mode);
  j["rig"] = rig_to_json(problem.rig);
  j["poses"] = ordered_json::array();
  for (const Pose& p : problem.poses) j["poses"].push_back(pose_to_json(p));
  if (!problem.gt_poses.empty()) {
    j["gt_poses"] = ordered_json::array();
    for (const Pose& p : problem.gt_poses) j["gt_poses"].push_back(pose_to_json(p));
  }
  j["tracks"] = ordered_json::array();
  for (const Track& track : problem.tracks) {
    ordered_json jt;
    if (track.world_hint) {
      jt["gt_point"] = std::vector<double>{track.world_hint->x(), track.world_hint->y(),
                                           track.world_hint->z()};
    }
    if (track.base.valid()) jt["base"] = std::vector<int>{track.base.l, track.base.r};
    jt["observations"] = ordered_json::array();
    for (const ObservationRay& obs : track.observations)
      jt["observations"].push_back(observation_to_json(obs));
    j["tracks"].push_back(std::move(jt));
  }
  return j.dump(1) + "\n";
}

Problem problem_from_json_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("problem file: ") + e.what());
  }
  try {
    if (!j.contains("version")) throw VersionMismatch("problem file: missing version tag");
    if (j.at("version").get<std::string>() != kProblemVersion)
      throw VersionMismatch("problem file: unsupported version '" +
                            j.at("version").get<std::string>() + "'");
    Problem problem;
    problem.rig = rig_from_json(j.at("rig"));
    if (j.contains("mode")) {
      const auto mode = solve_mode_from_string(j.at("mode").get<std::string>());
      if (!mode) throw ParseError("problem file: unknown mode");
      problem.mode = *mode;
    }
    for (const auto& jp : j.at("poses")) problem.poses.push_back(pose_from_json(jp));
    if (problem.poses.empty()) throw ParseError("problem file: needs at least one pose");
    if (j.contains("gt_poses"))
      for (const auto& jp : j.at("gt_poses")) problem.gt_poses.push_back(pose_from_json(jp));

    int track_index = 0;
    for (const auto& jt : j.at("tracks")) {
      Track track;
      if (jt.contains("gt_point")) {
        const auto g = jt.at("gt_point").get<std::vector<double>>();
        if (g.size() != 3)
          throw ParseError("track " + std::to_string(track_index) + ": gt_point needs 3 values");
        track.world_hint = Vec3(g[0], g[1], g[2]);
      }
      for (const auto& jo : jt.at("observations")) {
        const int pose_id = jo.at("pose_id").get<int>();
        const int camera_id = jo.at("camera_id").get<int>();
        if (pose_id < 0 || pose_id >= problem.pose_count())
          throw ParseError("track " + std::to_string(track_index) + ": pose_id out of range");
        if (camera_id < 0 || camera_id >= problem.rig.camera_count())
          throw ParseError("track " + std::to_string(track_index) + ": camera_id out of range");
        const Vec2 pixel(jo.at("u").get<double>(), jo.at("v").get<double>());
        Mat2 sigma_px = Mat2::Zero();
        if (jo.contains("sigma_px")) {
          const auto s = jo.at("sigma_px").get<std::vector<double>>();
          if (s.size() != 4)
            throw ParseError("track " + std::to_string(track_index) +
                             ": sigma_px needs 4 values");
          sigma_px << s[0], s[1], s[2], s[3];
        }
        ObservationRay ray = pixel_to_ray(problem.rig, camera_id, pixel, sigma_px);
        ray.pose_id = pose_id;
        track.observations.push_back(ray);
      }
      if (jt.contains("base")) {
        const auto b = jt.at("base").get<std::vector<int>>();
        if (b.size() != 2 || b[0] < 0 || b[1] < 0 || b[0] >= track.size() ||
            b[1] >= track.size() || b[0] == b[1])
          throw ParseError("track " + std::to_string(track_index) + ": invalid base pair");
        track.base = {b[0], b[1]};
      }
      problem.tracks.push_back(std::move(track));
      ++track_index;
    }
    return problem;
  } catch (const json::exception& e) {
    throw ParseError(std::string("problem file: ") + e.what());
  }
}

void write_problem(const Problem& problem, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write problem file: " + path);
  out << problem_to_json_string(problem);
}

Problem read_problem(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open problem file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return problem_from_json_string(buffer.str());
}

void write_poses(std::span<const Pose> poses, const std::string& path) {
  ordered_json j;
  j["poses"] = ordered_json::array();
  for (const Pose& p : poses) j["poses"].push_back(pose_to_json(p));
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write poses file: " + path);
  out << j.dump(1) << "\n";
}

std::vector<Pose> read_poses(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open poses file: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(std::string("poses file: ") + e.what());
  }
  std::vector<Pose> poses;
  for (const auto& jp : j.at("poses")) poses.push_back(pose_from_json(jp));
  return poses;
}

void write_points_csv(std::span<const std::optional<Vec3>> points, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write points file: " + path);
  out << "track_id,x,y,z\n";
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!points[i]) continue;
    out << i << ',' << format_double(points[i]->x()) << ',' << format_double(points[i]->y())
        << ',' << format_double(points[i]->z()) << '\n';
  }
}

void write_bases_csv(std::span<const Track> tracks, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write bases file: " + path);
  out << "track_id,left,right\n";
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    if (!tracks[i].base.valid()) continue;
    out << i << ',' << tracks[i].base.l << ',' << tracks[i].base.r << '\n';
  }
}

void write_report_csv(const SolveReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write report file: " + path);
  out << "iter,cost,lambda,accepted,wall_ms\n";
  for (const IterationRecord& rec : report.trace) {
    out << rec.iter << ',' << format_double(rec.cost) << ',' << format_double(rec.lambda) << ','
        << (rec.accepted ? 1 : 0) << ',' << format_double(rec.wall_ms) << '\n';
  }
}

RigMap load_rig_map(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open rig map: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(std::string("rig map: ") + e.what());
  }
  RigMap map;
  for (const auto& [name, entry] : j.at("images").items()) {
    RigMapEntry e;
    e.pose_id = entry.at("pose_id").get<int>();
    e.camera_id = entry.at("camera_id").get<int>();
    map.emplace_back(name, e);
  }
  return map;
}

}  // namespace mcpa
