#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mcpa/problem.hpp"

namespace mcpa {

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct VersionMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InconsistentRig : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr const char* kProblemVersion = "mcpa-problem/1";

/// Problem files store pixels, not rays; observation rays are recomputed from
/// the rig model on read. Writes are deterministic byte streams.
void write_problem(const Problem& problem, const std::string& path);
Problem read_problem(const std::string& path);

std::string problem_to_json_string(const Problem& problem);
Problem problem_from_json_string(const std::string& text);

void write_poses(std::span<const Pose> poses, const std::string& path);
std::vector<Pose> read_poses(const std::string& path);

/// CSV of triangulated points: header track_id,x,y,z.
void write_points_csv(std::span<const std::optional<Vec3>> points, const std::string& path);

/// CSV of selected base pairs: header track_id,left,right.
void write_bases_csv(std::span<const Track> tracks, const std::string& path);

/// Solver trace CSV: header iter,cost,lambda,accepted,wall_ms.
void write_report_csv(const SolveReport& report, const std::string& path);

/// Formats a double with enough digits to round-trip exactly.
std::string format_double(double value);

/// Assignment of one COLMAP image to a rig slot.
struct RigMapEntry {
  int pose_id = -1;
  int camera_id = -1;
};

/// Keys are COLMAP image names. File format:
/// { "images": { "name.png": {"pose_id": 0, "camera_id": 1}, ... } }
using RigMap = std::vector<std::pair<std::string, RigMapEntry>>;
RigMap load_rig_map(const std::string& path);

/// Imports a COLMAP text model (cameras.txt, images.txt, points3D.txt).
/// Image poses are grouped into rig poses through rig_map; pixel covariance
/// defaults to identity. The rig calibration is supplied, not derived.
Problem import_colmap_text(const std::string& dir, const RigConfig& rig, const RigMap& rig_map);

}  // namespace mcpa
