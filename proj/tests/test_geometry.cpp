#include <doctest.h>

#include "mcpa/geometry.hpp"
#include "test_helpers.hpp"

using namespace mcpa;

namespace {

bool is_rotation(const Mat3& R, double tol = 1e-12) {
  return (R * R.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol &&
         std::abs(R.determinant() - 1.0) <= tol;
}

}  // namespace

TEST_CASE("skew basics") {
  CHECK(skew(Vec3::Zero()).isZero(0.0));
  CHECK((skew(Vec3::UnitX()) * Vec3::UnitY() - Vec3::UnitZ()).norm() == doctest::Approx(0.0));

  test::Random rng(1);
  for (int k = 0; k < 100; ++k) {
    const Vec3 v = rng.vec3(-10, 10);
    const Vec3 w = rng.vec3(-10, 10);
    CHECK((skew(v) * w - v.cross(w)).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
    CHECK((skew(v) + skew(v).transpose()).isZero(0.0));
  }
}

TEST_CASE("exp_so3 basics and round trip") {
  CHECK(exp_so3(Vec3::Zero()).isIdentity(0.0));
  const Rotation quarter = exp_so3(Vec3(M_PI_2, 0, 0));
  CHECK((quarter * Vec3::UnitY() - Vec3::UnitZ()).norm() < 1e-15);

  test::Random rng(2);
  for (int k = 0; k < 500; ++k) {
    const Vec3 phi = rng.uniform(0.0, M_PI * 0.999) * rng.unit();
    const Rotation R = exp_so3(phi);
    CHECK(is_rotation(R));
    CHECK((log_so3(R) - phi).norm() < 1e-10);
  }
}

TEST_CASE("exp_so3 small-angle branch") {
  for (const double angle : {1e-12, 1e-9, 5e-9}) {
    const Vec3 phi = angle * Vec3(1, 2, 3).normalized();
    const Rotation R = exp_so3(phi);
    CHECK(is_rotation(R));
    CHECK((log_so3(R) - phi).norm() < 1e-15);
  }
}

TEST_CASE("log_so3 near pi") {
  test::Random rng(3);
  for (int k = 0; k < 50; ++k) {
    const Vec3 phi = (M_PI - 1e-8) * rng.unit();
    const Vec3 back = log_so3(exp_so3(phi));
    CHECK(std::abs(back.norm() - phi.norm()) < 1e-9);
    CHECK((back - phi).norm() < 1e-6);
  }
}

TEST_CASE("pose compose and inverse") {
  test::Random rng(4);
  for (int k = 0; k < 100; ++k) {
    const Pose p = rng.pose();
    const Pose id = p * p.inverse();
    CHECK((id.R - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(id.t.norm() < 1e-10);
    const Vec3 x = rng.vec3(-10, 10);
    CHECK((p.to_world(p.to_body(x)) - x).norm() < 1e-10);
  }
}

TEST_CASE("apply_right_perturbation") {
  test::Random rng(5);
  const Pose p = rng.pose();

  SUBCASE("zero perturbation is bit identical") {
    const Pose q = apply_right_perturbation(p, Perturbation{});
    CHECK(q.R == p.R);
    CHECK(q.t == p.t);
  }

  SUBCASE("identity pose gets exactly the exponential") {
    Perturbation d;
    d.phi = Vec3(M_PI_2, 0, 0);
    const Pose q = apply_right_perturbation(Pose{}, d);
    CHECK((q.R - exp_so3(d.phi)).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
  }

  SUBCASE("two small perturbations compose to first order") {
    const Vec3 a1 = rng.unit(), a2 = rng.unit();
    const auto defect = [&](double eps) {
      Perturbation d1, d2, sum;
      d1.phi = eps * a1;
      d2.phi = eps * a2;
      sum.phi = d1.phi + d2.phi;
      const Pose two_steps = apply_right_perturbation(apply_right_perturbation(p, d1), d2);
      const Pose one_step = apply_right_perturbation(p, sum);
      return (two_steps.R - one_step.R).cwiseAbs().maxCoeff();
    };
    const double coarse = defect(1e-3);
    const double fine = defect(1e-4);
    CHECK(coarse < 1e-5);
    CHECK(coarse / std::max(fine, 1e-300) > 30.0);  // quadratic in the step size
  }

  SUBCASE("negated log undoes a rotation-only perturbation") {
    for (int k = 0; k < 50; ++k) {
      Perturbation d;
      d.phi = rng.uniform(0.0, 2.0) * rng.unit();
      const Pose q = apply_right_perturbation(p, d);
      Perturbation back;
      back.phi = -d.phi;
      const Pose r = apply_right_perturbation(q, back);
      CHECK((r.R - p.R).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
}

TEST_CASE("project_to_so3 recovers a nearby rotation") {
  test::Random rng(6);
  for (int k = 0; k < 50; ++k) {
    const Rotation R = rng.rotation();
    Mat3 drifted = R;
    drifted(0, 1) += 1e-9;
    drifted(2, 0) -= 1e-9;
    const Rotation fixed = project_to_so3(drifted);
    CHECK(is_rotation(fixed));
    CHECK((fixed - R).cwiseAbs().maxCoeff() < 1e-8);
  }
}
