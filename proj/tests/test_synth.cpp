#include <doctest.h>

#include "mcpa/optimizer.hpp"
#include "mcpa/problem_io.hpp"
#include "mcpa/synth.hpp"
#include "test_helpers.hpp"

using namespace mcpa;

TEST_CASE("forward rig matches the paper setup") {
  const RigConfig rig = make_rig(RigPreset::Forward);
  REQUIRE(rig.camera_count() == 4);
  for (int c = 0; c < 4; ++c) {
    CHECK(rig.cameras[c].intrinsics.fx == 540.0);
    CHECK(rig.cameras[c].intrinsics.cx == 540.0);
    CHECK(rig.cameras[c].intrinsics.cy == 480.0);
    CHECK(rig.cameras[c].intrinsics.width == 1080);
    CHECK(rig.cameras[c].intrinsics.height == 960);
    CHECK(rig.cameras[c].extrinsics.R.isIdentity(0.0));
    CHECK((rig.cameras[c].extrinsics.t - Vec3(0.5 * c, 0, 0)).norm() == doctest::Approx(0.0));
  }
}

TEST_CASE("omni rig axes point in four directions") {
  const RigConfig rig = make_rig(RigPreset::Omni);
  REQUIRE(rig.camera_count() == 4);
  for (int a = 0; a < 4; ++a) {
    const Vec3 axis_a = rig.cameras[a].extrinsics.R * Vec3::UnitZ();
    for (int b = a + 1; b < 4; ++b) {
      const Vec3 axis_b = rig.cameras[b].extrinsics.R * Vec3::UnitZ();
      const double dot = axis_a.dot(axis_b);
      CHECK((std::abs(dot) < 1e-14 || std::abs(dot + 1.0) < 1e-14));
    }
  }
}

TEST_CASE("rig presets serialize and deserialize unchanged") {
  for (const auto preset : {RigPreset::Forward, RigPreset::Omni}) {
    const RigConfig rig = make_rig(preset);
    const RigConfig back = rig_from_json_string(rig_to_json_string(rig));
    REQUIRE(back.camera_count() == rig.camera_count());
    for (int c = 0; c < rig.camera_count(); ++c) {
      CHECK(back.cameras[c].extrinsics.R == rig.cameras[c].extrinsics.R);
      CHECK(back.cameras[c].extrinsics.t == rig.cameras[c].extrinsics.t);
    }
    CHECK(rig_to_json_string(back) == rig_to_json_string(rig));
  }
}

TEST_CASE("linear trajectory steps along x in the world->body convention") {
  const auto poses = make_trajectory(TrajectoryKind::Linear, 3, 2.0);
  REQUIRE(poses.size() == 3);
  CHECK(poses[0].t.norm() == doctest::Approx(0.0));
  CHECK((poses[1].t - Vec3(-2, 0, 0)).norm() == doctest::Approx(0.0));
  CHECK((poses[2].t - Vec3(-4, 0, 0)).norm() == doctest::Approx(0.0));
  for (const Pose& p : poses) CHECK(p.R.isIdentity(0.0));
}

TEST_CASE("curve trajectory has uniform yaw increments and valid rotations") {
  const int n = 12;
  const auto poses = make_trajectory(TrajectoryKind::Curve, n, 2.0, 50.0);
  REQUIRE(static_cast<int>(poses.size()) == n);
  std::optional<double> delta;
  for (int k = 0; k + 1 < n; ++k) {
    const Rotation rel = poses[k + 1].R * poses[k].R.transpose();
    const double yaw = log_so3(rel).norm();
    if (!delta)
      delta = yaw;
    else
      CHECK(std::abs(yaw - *delta) < 1e-10);
    CHECK((poses[k].R * poses[k].R.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff() <
          1e-12);
    CHECK(std::abs(poses[k].R.determinant() - 1.0) < 1e-12);
  }
}

TEST_CASE("noise-free problems have zero cost at ground truth") {
  SynthSpec spec;
  spec.n_poses = 6;
  spec.n_points = 150;
  spec.sigma_max = 0.0;
  spec.seed = 31;
  SynthResult data = generate_problem(spec);
  finalize_tracks(data.problem);
  REQUIRE(!data.problem.tracks.empty());
  CHECK(build_cost(data.problem, data.gt_poses) < 1e-20);
}

TEST_CASE("same seed gives bit-identical problem files") {
  SynthSpec spec;
  spec.n_poses = 5;
  spec.n_points = 80;
  spec.sigma_max = 3.0;
  spec.seed = 77;
  const SynthResult a = generate_problem(spec);
  const SynthResult b = generate_problem(spec);
  CHECK(problem_to_json_string(a.problem) == problem_to_json_string(b.problem));
}

TEST_CASE("different seeds give different problems") {
  SynthSpec spec;
  spec.n_poses = 5;
  spec.n_points = 80;
  spec.sigma_max = 3.0;
  spec.seed = 77;
  const SynthResult a = generate_problem(spec);
  spec.seed = 78;
  const SynthResult b = generate_problem(spec);
  CHECK(problem_to_json_string(a.problem) != problem_to_json_string(b.problem));
}

TEST_CASE("observations satisfy the projection equation before noise") {
  SynthSpec spec;
  spec.n_poses = 8;
  spec.n_points = 120;
  spec.sigma_max = 0.0;
  spec.seed = 13;
  const SynthResult data = generate_problem(spec);
  for (std::size_t tk = 0; tk < data.problem.tracks.size(); ++tk) {
    const Track& track = data.problem.tracks[tk];
    const Vec3 X = data.gt_points[tk];
    for (const ObservationRay& obs : track.observations) {
      const Vec3 body = data.gt_poses[obs.pose_id].to_body(X);
      const double s = obs.f.dot(body - obs.v);
      CHECK(s > 0.0);
      CHECK((s * obs.f + obs.v - body).norm() < 1e-9);
    }
  }
}

TEST_CASE("pixel noise stays within the configured envelope") {
  SynthSpec spec;
  spec.n_poses = 6;
  spec.n_points = 200;
  spec.seed = 21;
  spec.sigma_max = 0.0;
  const SynthResult clean = generate_problem(spec);
  spec.sigma_max = 4.0;
  const SynthResult noisy = generate_problem(spec);

  REQUIRE(clean.problem.tracks.size() == noisy.problem.tracks.size());
  double sum_sq = 0.0;
  std::size_t n = 0;
  for (std::size_t tk = 0; tk < clean.problem.tracks.size(); ++tk) {
    const auto& a = clean.problem.tracks[tk].observations;
    const auto& b = noisy.problem.tracks[tk].observations;
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      sum_sq += (a[i].pixel - b[i].pixel).squaredNorm();
      n += 2;
      // sigma_px records the drawn noise level.
      CHECK(b[i].sigma_px(0, 0) <= spec.sigma_max * spec.sigma_max);
    }
  }
  const double std_dev = std::sqrt(sum_sq / n);
  CHECK(std_dev <= spec.sigma_max);
  CHECK(std_dev > 0.5);  // noise was actually applied
}

TEST_CASE("initial pose perturbations have the stated magnitudes") {
  SynthSpec spec;
  spec.n_poses = 40;
  spec.n_points = 60;
  spec.sigma_max = 0.0;
  spec.seed = 3;
  const SynthResult data = generate_problem(spec);

  // Gauge anchor untouched.
  CHECK(data.problem.poses[0].R == data.gt_poses[0].R);
  CHECK(data.problem.poses[0].t == data.gt_poses[0].t);

  double trans_sq = 0.0;
  for (int p = 1; p < spec.n_poses; ++p) {
    const double angle = std::acos(std::clamp(
        ((data.gt_poses[p].R * data.problem.poses[p].R.transpose()).trace() - 1.0) / 2.0, -1.0,
        1.0));
    CHECK(std::abs(angle - 2.0 * M_PI / 180.0) < 1e-10);
    trans_sq += (data.gt_poses[p].t - data.problem.poses[p].t).squaredNorm();
  }
  const double trans_std = std::sqrt(trans_sq / (spec.n_poses - 1));
  CHECK(trans_std > 0.25);
  CHECK(trans_std < 0.9);
}

TEST_CASE("forward-linear 50x1000 observation count has the right order") {
  SynthSpec spec;
  spec.n_poses = 50;
  spec.n_points = 1000;
  spec.sigma_max = 4.0;
  spec.seed = 1;
  const SynthResult data = generate_problem(spec);
  const std::size_t obs = data.problem.observation_count();
  CHECK(obs > 10000);
  CHECK(obs < 200000);
}

TEST_CASE("degenerate specs are rejected") {
  SynthSpec spec;
  spec.n_poses = 1;
  CHECK_THROWS(generate_problem(spec));
  spec.n_poses = 5;
  spec.n_points = 0;
  CHECK_THROWS(generate_problem(spec));
}
