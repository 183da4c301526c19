#include "mcpa/synth.hpp"

#include <cmath>
#include <stdexcept>

#include "mcpa/rng.hpp"

namespace mcpa {

std::optional<RigPreset> rig_preset_from_string(const std::string& name) {
  if (name == "forward") return RigPreset::Forward;
  if (name == "omni") return RigPreset::Omni;
  return std::nullopt;
}

std::optional<TrajectoryKind> trajectory_from_string(const std::string& name) {
  if (name == "linear") return TrajectoryKind::Linear;
  if (name == "curve") return TrajectoryKind::Curve;
  return std::nullopt;
}

namespace {

CameraIntrinsics paper_intrinsics() {
  CameraIntrinsics k;
  k.fx = k.fy = 540.0;
  k.cx = 540.0;
  k.cy = 480.0;
  k.width = 1080;
  k.height = 960;
  return k;
}

Rotation yaw(double angle) {  // about body-y
  Rotation R;
  const double c = std::cos(angle), s = std::sin(angle);
  R << c, 0.0, s,
       0.0, 1.0, 0.0,
      -s, 0.0, c;
  return R;
}

}  // namespace

RigConfig make_rig(RigPreset preset) {
  RigConfig rig;
  const CameraIntrinsics k = paper_intrinsics();
  if (preset == RigPreset::Forward) {
    for (int c = 0; c < 4; ++c) {
      Camera cam;
      cam.intrinsics = k;
      cam.extrinsics.t = Vec3(0.5 * c, 0.0, 0.0);
      rig.cameras.push_back(cam);
    }
  } else {
    // Outward-facing cameras on a 0.5 m square: +z, +x, -z, -x.
    const double h = 0.25;
    const Vec3 positions[4] = {{0, 0, h}, {h, 0, 0}, {0, 0, -h}, {-h, 0, 0}};
    for (int c = 0; c < 4; ++c) {
      Camera cam;
      cam.intrinsics = k;
      cam.extrinsics.R = yaw(M_PI_2 * c);
      cam.extrinsics.t = positions[c];
      rig.cameras.push_back(cam);
    }
  }
  return rig;
}

std::vector<Pose> make_trajectory(TrajectoryKind kind, int n_poses, double linear_step_m,
                                  double curve_radius_m) {
  std::vector<Pose> poses(n_poses);
  if (kind == TrajectoryKind::Linear) {
    for (int k = 0; k < n_poses; ++k) {
      poses[k].t = Vec3(-linear_step_m * k, 0.0, 0.0);  // body at (step*k, 0, 0)
    }
  } else {
    for (int k = 0; k < n_poses; ++k) {
      const double alpha = 2.0 * M_PI * k / n_poses;
      const Vec3 center(curve_radius_m * std::cos(alpha), 0.0,
                        curve_radius_m * std::sin(alpha));
      poses[k].R = yaw(-alpha);  // optical axis tangent to the circle
      poses[k].t = -(poses[k].R * center);
    }
  }
  return poses;
}

SynthResult generate_problem(const SynthSpec& spec) {
  if (spec.n_poses < 2) throw std::runtime_error("synth: need at least 2 poses");
  if (spec.n_points < 1) throw std::runtime_error("synth: need at least 1 point");

  SynthResult out;
  out.problem.rig = make_rig(spec.rig_preset);
  out.gt_poses =
      make_trajectory(spec.trajectory, spec.n_poses, spec.linear_step_m, spec.curve_radius_m);

  const int n_cams = out.problem.rig.camera_count();
  const CounterRng rng_points(spec.seed, 0);
  const CounterRng rng_sigma(spec.seed, 1);
  const CounterRng rng_pixel(spec.seed, 2);
  const CounterRng rng_axis(spec.seed, 3);
  const CounterRng rng_trans(spec.seed, 4);

  for (int j = 0; j < spec.n_points; ++j) {
    const double e = spec.scene_half_extent_m;
    const Vec3 X(rng_points.uniform(3 * j + 0, -e, e), rng_points.uniform(3 * j + 1, -e, e),
                 rng_points.uniform(3 * j + 2, -e, e));
    Track track;
    for (int p = 0; p < spec.n_poses; ++p) {
      for (int c = 0; c < n_cams; ++c) {
        const std::uint64_t slot =
            (static_cast<std::uint64_t>(j) * spec.n_poses + p) * n_cams + c;
        const auto proj = project(out.problem.rig, c, out.gt_poses[p], X);
        if (!proj || !proj->in_image) continue;
        const double sigma = rng_sigma.uniform(slot, 0.0, spec.sigma_max);
        Vec2 pixel = proj->pixel;
        if (sigma > 0.0) {
          pixel.x() += sigma * rng_pixel.normal(2 * slot);
          pixel.y() += sigma * rng_pixel.normal(2 * slot + 1);
        }
        const Mat2 sigma_px = sigma * sigma * Mat2::Identity();
        ObservationRay ray = pixel_to_ray(out.problem.rig, c, pixel, sigma_px);
        ray.pose_id = p;
        track.observations.push_back(ray);
      }
    }
    if (track.size() < 2) continue;  // dropped, never resampled
    track.world_hint = X;
    out.gt_points.push_back(X);
    out.problem.tracks.push_back(std::move(track));
  }
  if (out.problem.tracks.empty()) throw std::runtime_error("synth: no track survived visibility");

  // Initial poses: ground truth perturbed by an exact-angle rotation about a
  // random axis and isotropic Gaussian translation noise with |dt| std equal
  // to trans_perturb_m. Pose 0 is the gauge anchor and stays exact.
  out.problem.poses = out.gt_poses;
  const double angle = spec.rot_perturb_deg * M_PI / 180.0;
  const double axis_sigma = spec.trans_perturb_m / std::sqrt(3.0);
  for (int p = 1; p < spec.n_poses; ++p) {
    Vec3 axis(rng_axis.normal(3 * p + 0), rng_axis.normal(3 * p + 1),
              rng_axis.normal(3 * p + 2));
    if (axis.norm() < 1e-12) axis = Vec3::UnitX();
    axis.normalize();
    out.problem.poses[p].R = out.gt_poses[p].R * exp_so3(angle * axis);
    out.problem.poses[p].t =
        out.gt_poses[p].t + axis_sigma * Vec3(rng_trans.normal(3 * p + 0),
                                              rng_trans.normal(3 * p + 1),
                                              rng_trans.normal(3 * p + 2));
  }
  out.problem.gt_poses = out.gt_poses;
  return out;
}

}  // namespace mcpa
