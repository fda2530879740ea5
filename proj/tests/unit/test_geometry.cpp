#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "ogs/errors.hpp"
#include "ogs/geometry.hpp"

using namespace ogs;

namespace {

Eigen::Matrix3d rot_z90() {
  Eigen::Matrix3d R;
  R << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  return R;
}

double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

Twist random_twist(std::mt19937_64& rng, double max_angle) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::Vector3d axis(u(rng), u(rng), u(rng));
  axis.normalize();
  const double angle = 0.5 * (u(rng) + 1.0) * max_angle;
  return {axis * angle, Eigen::Vector3d(u(rng), u(rng), u(rng)) * 5.0};
}

}  // namespace

TEST_CASE("se3_exp closed-form cases") {
  const Pose id = se3_exp(Twist{});
  CHECK(max_abs(id.matrix() - Eigen::Matrix4d::Identity()) == 0.0);

  const Pose t = se3_exp({Eigen::Vector3d::Zero(), Eigen::Vector3d(1, 2, 3)});
  CHECK(max_abs(t.rotation - Eigen::Matrix3d::Identity()) == 0.0);
  CHECK(max_abs(t.translation - Eigen::Vector3d(1, 2, 3)) == 0.0);

  const Pose r = se3_exp({Eigen::Vector3d(0, 0, std::numbers::pi / 2), Eigen::Vector3d::Zero()});
  CHECK(max_abs(r.rotation - rot_z90()) < 1e-15);
  CHECK(max_abs(r.translation) == 0.0);

  CHECK_THROWS_AS(se3_exp({Eigen::Vector3d(NAN, 0, 0), Eigen::Vector3d::Zero()}), InvalidArgument);
}

TEST_CASE("se3_log inverts the worked examples") {
  const Twist z = se3_log(Pose::identity());
  CHECK(z.omega.norm() == 0.0);
  CHECK(z.nu.norm() == 0.0);

  Pose p;
  p.rotation = rot_z90();
  const Twist xi = se3_log(p);
  CHECK(max_abs(xi.omega - Eigen::Vector3d(0, 0, std::numbers::pi / 2)) < 1e-12);
  CHECK(xi.nu.norm() < 1e-12);
}

TEST_CASE("se3_log near pi is rejected") {
  Pose p = se3_exp({Eigen::Vector3d(0, std::numbers::pi - 1e-8, 0), Eigen::Vector3d::Zero()});
  CHECK_THROWS_AS(se3_log(p), NearSingularity);
}

TEST_CASE("exp/log round trip over random twists") {
  std::mt19937_64 rng(7);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Twist xi = random_twist(rng, 3.0);
    const Twist back = se3_log(se3_exp(xi));
    worst = std::max({worst, max_abs(back.omega - xi.omega), max_abs(back.nu - xi.nu)});
  }
  CHECK(worst < 1e-9);

  // Small-angle branch.
  const Twist tiny{Eigen::Vector3d(1e-10, -2e-10, 5e-11), Eigen::Vector3d(0.3, 0.2, 0.1)};
  const Twist tb = se3_log(se3_exp(tiny));
  CHECK(max_abs(tb.omega - tiny.omega) < 1e-18);
  CHECK(max_abs(tb.nu - tiny.nu) < 1e-15);
}

TEST_CASE("pose invariants") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 20; ++i) {
    const Pose a = se3_exp(random_twist(rng, 3.0));
    const Pose b = se3_exp(random_twist(rng, 3.0));
    const Pose c = se3_exp(random_twist(rng, 3.0));
    CHECK(max_abs(a.rotation.transpose() * a.rotation - Eigen::Matrix3d::Identity()) < 1e-9);
    CHECK(std::abs(a.rotation.determinant() - 1.0) < 1e-9);
    CHECK(max_abs((a * a.inverse()).matrix() - Eigen::Matrix4d::Identity()) < 1e-9);
    CHECK(max_abs(((a * b) * c).matrix() - (a * (b * c)).matrix()) < 1e-12);
  }
}

TEST_CASE("quat_to_rot") {
  CHECK(max_abs(quat_to_rot({1, 0, 0, 0}) - Eigen::Matrix3d::Identity()) == 0.0);
  const double h = std::sqrt(0.5);
  CHECK(max_abs(quat_to_rot({h, 0, 0, h}) - rot_z90()) < 1e-15);
  CHECK(max_abs(quat_to_rot({2, 0, 0, 0}) - Eigen::Matrix3d::Identity()) == 0.0);
  CHECK_THROWS_AS(quat_to_rot({0, 0, 0, 1e-13}), InvalidArgument);

  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  for (int i = 0; i < 20; ++i) {
    const Eigen::Vector4d q(n(rng), n(rng), n(rng), n(rng));
    const Eigen::Matrix3d R = quat_to_rot(q);
    CHECK(max_abs(R.transpose() * R - Eigen::Matrix3d::Identity()) < 1e-12);
    CHECK(std::abs(R.determinant() - 1.0) < 1e-12);
    CHECK(max_abs(quat_to_rot(rot_to_quat(R)) - R) < 1e-12);
  }
}

TEST_CASE("rotation_angle_deg") {
  const Eigen::Matrix3d I = Eigen::Matrix3d::Identity();
  CHECK(rotation_angle_deg(I, I) == 0.0);
  CHECK(rotation_angle_deg(I, rot_z90()) == doctest::Approx(90.0).epsilon(1e-14));
  CHECK(rotation_angle_deg(rot_z90(), rot_z90()) == 0.0);

  // trace slightly above 3 from rounding is clamped, not an error.
  Eigen::Matrix3d drift = I;
  drift(0, 0) = 1.0 + 1e-12;
  CHECK(rotation_angle_deg(I, drift) == 0.0);

  Eigen::Matrix3d bad = I;
  bad(0, 0) = 1.1;
  CHECK_THROWS_AS(rotation_angle_deg(I, bad), InvalidArgument);

  std::mt19937_64 rng(5);
  for (int i = 0; i < 20; ++i) {
    const Eigen::Matrix3d a = se3_exp(random_twist(rng, 3.0)).rotation;
    const Eigen::Matrix3d b = se3_exp(random_twist(rng, 3.0)).rotation;
    const double ab = rotation_angle_deg(a, b);
    CHECK(ab == rotation_angle_deg(b, a));
    CHECK(ab >= 0.0);
    CHECK(ab <= 180.0);
  }
}
