#include <doctest.h>

#include "mcpa/camera.hpp"
#include "test_helpers.hpp"

using namespace mcpa;

namespace {

RigConfig paper_mono_rig() {
  RigConfig rig;
  Camera cam;
  cam.intrinsics.fx = cam.intrinsics.fy = 540.0;
  cam.intrinsics.cx = 540.0;
  cam.intrinsics.cy = 480.0;
  cam.intrinsics.width = 1080;
  cam.intrinsics.height = 960;
  rig.cameras.push_back(cam);
  return rig;
}

RigConfig unit_rig(const Vec3& t_c = Vec3::Zero()) {
  RigConfig rig;
  Camera cam;
  cam.intrinsics.fx = cam.intrinsics.fy = 1.0;
  cam.intrinsics.width = 2;  // pixel (0,0) counts as in-image
  cam.intrinsics.height = 2;
  cam.extrinsics.t = t_c;
  rig.cameras.push_back(cam);
  return rig;
}

}  // namespace

TEST_CASE("project pinhole center and axis") {
  const auto rig = paper_mono_rig();
  const auto p = project(rig, 0, Pose{}, Vec3(0, 0, 5));
  REQUIRE(p.has_value());
  CHECK(p->pixel.x() == doctest::Approx(540.0));
  CHECK(p->pixel.y() == doctest::Approx(480.0));
  CHECK(p->in_image);

  const auto q = project(unit_rig(), 0, Pose{}, Vec3(0, 0, 5));
  REQUIRE(q.has_value());
  CHECK(q->pixel.norm() == doctest::Approx(0.0));
}

TEST_CASE("project rejects points behind the camera") {
  const auto rig = paper_mono_rig();
  CHECK(!project(rig, 0, Pose{}, Vec3(0, 0, -5)).has_value());
  CHECK(!project(rig, 0, Pose{}, Vec3(0, 0, 0)).has_value());
  CHECK(!project(rig, 0, Pose{}, Vec3(0.1, 0.1, 1e-12)).has_value());
}

TEST_CASE("project flags out-of-image pixels without failing") {
  const auto rig = paper_mono_rig();
  const auto p = project(rig, 0, Pose{}, Vec3(50, 0, 5));  // far off to the side
  REQUIRE(p.has_value());
  CHECK(!p->in_image);
}

TEST_CASE("pixel_to_ray basics") {
  const auto r0 = pixel_to_ray(unit_rig(), 0, Vec2(0, 0), Mat2::Zero());
  CHECK((r0.f - Vec3(0, 0, 1)).norm() == doctest::Approx(0.0));
  CHECK(r0.v.norm() == doctest::Approx(0.0));

  const auto r1 = pixel_to_ray(unit_rig(Vec3(1, 0, 0)), 0, Vec2(0, 0), Mat2::Zero());
  CHECK((r1.f - Vec3(0, 0, 1)).norm() == doctest::Approx(0.0));
  CHECK((r1.v - Vec3(1, 0, 0)).norm() == doctest::Approx(0.0));
}

TEST_CASE("project then back-project is consistent with the generalized projection") {
  test::Random rng(10);
  RigConfig rig = paper_mono_rig();
  rig.cameras[0].extrinsics.R = exp_so3(Vec3(0.2, -0.1, 0.3));
  rig.cameras[0].extrinsics.t = Vec3(0.4, -0.2, 0.1);
  for (int k = 0; k < 200; ++k) {
    const Pose pose = rng.pose(2.0);
    const Vec3 x_body = Vec3(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(2, 30));
    // Pick a world point that lands in front of the camera by construction.
    const Vec3 x_world =
        pose.to_world(rig.cameras[0].extrinsics.R * x_body + rig.cameras[0].extrinsics.t);
    const auto p = project(rig, 0, pose, x_world);
    REQUIRE(p.has_value());
    const auto ray = pixel_to_ray(rig, 0, p->pixel, Mat2::Zero());
    // Direction matches R_c^T composition of the projection within 1e-12.
    const Vec3 expected = (pose.to_body(x_world) - ray.v).normalized();
    CHECK((ray.f - expected).cwiseAbs().maxCoeff() < 1e-12);
    // s f + v = R X + t with s the ray depth.
    const double s = ray.f.dot(pose.to_body(x_world) - ray.v);
    CHECK((s * ray.f + ray.v - pose.to_body(x_world)).norm() < 1e-9);
    CHECK(std::abs(ray.f.norm() - 1.0) < 1e-12);
  }
}

TEST_CASE("propagate_ray_covariance zero and linear-scaling") {
  const auto rig = paper_mono_rig();
  const Vec2 pixel(700.0, 300.0);
  CHECK(propagate_ray_covariance(rig, 0, pixel, Mat2::Zero()).isZero(0.0));

  const Mat2 sigma_px = Mat2::Identity() * 1.7;
  const Mat3 base = propagate_ray_covariance(rig, 0, pixel, sigma_px);
  const Mat3 scaled = propagate_ray_covariance(rig, 0, pixel, 3.0 * sigma_px);
  CHECK((scaled - 3.0 * base).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("ray covariance lives in the tangent plane") {
  test::Random rng(11);
  RigConfig rig = paper_mono_rig();
  rig.cameras[0].extrinsics.R = exp_so3(Vec3(-0.3, 0.2, 0.1));
  for (int k = 0; k < 200; ++k) {
    const Vec2 pixel(rng.uniform(0, 1080), rng.uniform(0, 960));
    const double s = rng.uniform(0.1, 4.0);
    const auto ray = pixel_to_ray(rig, 0, pixel, s * s * Mat2::Identity());
    CHECK(ray.f.dot(ray.sigma_f * ray.f) <= 1e-8 * ray.sigma_f.trace());
    CHECK((ray.sigma_f - ray.sigma_f.transpose()).cwiseAbs().maxCoeff() < 1e-18);
    Eigen::SelfAdjointEigenSolver<Mat3> eig(ray.sigma_f);
    CHECK(eig.eigenvalues()(0) > -1e-18);  // PSD
  }
}

TEST_CASE("ray covariance matches Monte-Carlo sampling") {
  const auto rig = paper_mono_rig();
  const Vec2 pixel(800.0, 300.0);  // off center so the covariance is generic
  const Mat2 sigma_px = Mat2::Identity();
  const Mat3 predicted = propagate_ray_covariance(rig, 0, pixel, sigma_px);

  test::Random rng(12);
  const int n = 100000;
  Vec3 mean = Vec3::Zero();
  Mat3 second = Mat3::Zero();
  for (int k = 0; k < n; ++k) {
    const Vec2 noisy = pixel + Vec2(rng.normal(), rng.normal());
    const Vec3 f = pixel_to_ray(rig, 0, noisy, Mat2::Zero()).f;
    mean += f;
    second += f * f.transpose();
  }
  mean /= n;
  const Mat3 empirical = second / n - mean * mean.transpose();
  const double scale = predicted.cwiseAbs().maxCoeff();
  CHECK((empirical - predicted).cwiseAbs().maxCoeff() < 0.10 * scale);
}

TEST_CASE("rig config JSON round trip") {
  RigConfig rig = paper_mono_rig();
  rig.cameras[0].extrinsics.R = exp_so3(Vec3(0.1, 0.2, 0.3));
  rig.cameras[0].extrinsics.t = Vec3(0.5, -0.25, 0.125);
  const std::string text = rig_to_json_string(rig);
  const RigConfig back = rig_from_json_string(text);
  REQUIRE(back.camera_count() == 1);
  CHECK(back.cameras[0].intrinsics.fx == rig.cameras[0].intrinsics.fx);
  CHECK(back.cameras[0].extrinsics.R == rig.cameras[0].extrinsics.R);
  CHECK(back.cameras[0].extrinsics.t == rig.cameras[0].extrinsics.t);
  CHECK(rig_to_json_string(back) == text);
}

TEST_CASE("rig config rejects bad input") {
  CHECK_THROWS(rig_from_json_string("{\"cameras\":[]}"));
  CHECK_THROWS(rig_from_json_string(
      "{\"cameras\":[{\"fx\":-1,\"fy\":1,\"cx\":0,\"cy\":0,\"width\":10,\"height\":10,"
      "\"R\":[1,0,0,0,1,0,0,0,1],\"t\":[0,0,0]}]}"));
  CHECK_THROWS(rig_from_json_string("not json"));
}
