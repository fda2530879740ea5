#include <doctest.h>

#include <cmath>
#include <random>

#include "../support/scenes.hpp"
#include "ogs/errors.hpp"
#include "ogs/tracking.hpp"

using namespace ogs;
using namespace ogs::testing;

namespace {

const CameraIntrinsics kCam{64.0, 64.0, 63.5, 47.5, 128, 96};

struct Correspondences {
  std::vector<Eigen::Vector3d> X;
  std::vector<Eigen::Vector2d> px;
  Pose truth;
};

Correspondences make_correspondences(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Correspondences c;
  c.truth = perturb(rng, Pose::identity(), 0.3, 1.0);
  const Pose inv = c.truth.inverse();
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector2d px(u(rng) * (kCam.width - 1), u(rng) * (kCam.height - 1));
    const Eigen::Vector3d pc = kCam.unproject(px.x(), px.y(), 2.0 + 6.0 * u(rng));
    c.X.push_back(inv.apply(pc));
    c.px.push_back(px);
  }
  return c;
}

}  // namespace

TEST_CASE("pnp_ransac recovers the pose from exact correspondences") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    const Correspondences c = make_correspondences(rng, 50);
    const PnpResult r = pnp_ransac(c.X, c.px, kCam, {}, 17);
    CHECK(rotation_error_rad(r.pose, c.truth) < 1e-6);
    CHECK(translation_error(r.pose, c.truth) < 1e-6);
    CHECK(r.inlier_count == 50);
  }
}

TEST_CASE("pnp_ransac with 30% outliers") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    Correspondences c = make_correspondences(rng, 50);
    std::vector<bool> corrupted(50, false);
    for (std::size_t i = 0; i < 15; ++i) {
      c.px[i] = Eigen::Vector2d(u(rng) * (kCam.width - 1), u(rng) * (kCam.height - 1));
      corrupted[i] = true;
    }
    const PnpResult r = pnp_ransac(c.X, c.px, kCam, {}, 23 + trial);
    CHECK(rotation_error_rad(r.pose, c.truth) < 1e-3);
    CHECK(translation_error(r.pose, c.truth) < 1e-3);
    int excluded = 0;
    for (std::size_t i = 0; i < 50; ++i)
      if (corrupted[i] && !r.inliers[i]) ++excluded;
    CHECK(excluded >= 14);  // at least 90% of 15
  }
}

TEST_CASE("pnp_ransac input errors and determinism") {
  std::mt19937_64 rng(3);
  const Correspondences c = make_correspondences(rng, 50);
  CHECK_THROWS_AS(pnp_ransac(std::span(c.X).first(5), std::span(c.px).first(5), kCam, {}, 0), DegenerateInput);

  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Eigen::Vector2d> junk(50);
  for (auto& p : junk) p = Eigen::Vector2d(u(rng) * 127, u(rng) * 95);
  CHECK_THROWS_AS(pnp_ransac(c.X, junk, kCam, {}, 0), PnpDegenerate);

  std::vector<Eigen::Vector2d> noisy = c.px;
  std::normal_distribution<double> n(0.0, 0.5);
  for (auto& p : noisy) p += Eigen::Vector2d(n(rng), n(rng));
  const PnpResult a = pnp_ransac(c.X, noisy, kCam, {}, 5);
  const PnpResult b = pnp_ransac(c.X, noisy, kCam, {}, 5);
  CHECK(a.pose.rotation == b.pose.rotation);
  CHECK(a.pose.translation == b.pose.translation);
  CHECK(a.inliers == b.inliers);
}

TEST_CASE("pnp_ransac keeps sampling after a near-empty first consensus") {
  // Noisy minimal samples occasionally give a wild first hypothesis with a
  // handful of inliers; the adaptive iteration bound must not cut the search.
  std::mt19937_64 rng(11);
  Correspondences c = make_correspondences(rng, 4096);
  std::normal_distribution<double> n(0.0, 0.3);
  for (auto& p : c.px) p += Eigen::Vector2d(n(rng), n(rng));
  int failures = 0;
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    try {
      const PnpResult r = pnp_ransac(c.X, c.px, kCam, {}, seed);
      CHECK(r.inlier_count > 3500u);
    } catch (const PnpDegenerate&) {
      ++failures;
    }
  }
  CHECK(failures == 0);
}

TEST_CASE("pnp_ransac never samples zero-weight correspondences") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Correspondences c = make_correspondences(rng, 60);
  // Half the set is garbage with zero weight: every hypothesis comes from the good half.
  std::vector<double> w(60, 1.0);
  for (std::size_t i = 0; i < 30; ++i) {
    c.px[i] = Eigen::Vector2d(u(rng) * 127, u(rng) * 95);
    w[i] = 0.0;
  }
  const PnpResult r = pnp_ransac(c.X, c.px, kCam, w, 1, {.max_iterations = 1});
  CHECK(rotation_error_rad(r.pose, c.truth) < 1e-6);
}

TEST_CASE("estimate_relative_pose") {
  std::mt19937_64 rng(5);
  const SceneCloud cloud = random_cloud(rng, 40000, {-8, -6, 4}, {8, 6, 12});

  SUBCASE("no motion gives identity") {
    const PointmapPair p = synth_pair(cloud, Pose::identity(), Pose::identity(), kCam, 0, 1);
    const RelativePose r = estimate_relative_pose(p, kCam);
    CHECK(rotation_error_rad(r.T_trans, Pose::identity()) < 1e-6);
    CHECK(r.T_trans.translation.norm() < 1e-6);
    CHECK(r.correspondences <= 4096);
  }
  SUBCASE("forward motion of one unit") {
    Pose T1;
    T1.translation = Eigen::Vector3d(0, 0, -1);  // camera centre moves to z = +1
    const PointmapPair p = synth_pair(cloud, Pose::identity(), T1, kCam, 0, 1);
    const RelativePose r = estimate_relative_pose(p, kCam);
    CHECK((r.T_trans.translation - Eigen::Vector3d(0, 0, -1)).norm() < 1e-4);
    CHECK(rotation_error_rad(r.T_trans, Pose::identity()) < 1e-5);
  }
  SUBCASE("translation scales with the pointmap") {
    const Pose T1 = perturb(rng, Pose::identity(), 0.05, 0.4);
    PointmapPair p = synth_pair(cloud, Pose::identity(), T1, kCam, 0, 1);
    const RelativePose r1 = estimate_relative_pose(p, kCam);
    for (auto& x : p.X2) x *= 2.5f;
    const RelativePose r2 = estimate_relative_pose(p, kCam);
    CHECK(rotation_error_rad(r1.T_trans, r2.T_trans) < 1e-6);
    CHECK((r2.T_trans.translation - 2.5 * r1.T_trans.translation).norm() < 1e-6 * 2.5);
  }
  SUBCASE("zero confidence everywhere") {
    PointmapPair p = synth_pair(cloud, Pose::identity(), Pose::identity(), kCam, 0, 1);
    std::fill(p.conf2.begin(), p.conf2.end(), 0.0f);
    CHECK_THROWS_AS(estimate_relative_pose(p, kCam), DegenerateInput);
  }
}

TEST_CASE("chain_pose") {
  std::mt19937_64 rng(6);
  const Pose a = perturb(rng, Pose::identity(), 0.7, 2.0);
  const Pose b = perturb(rng, Pose::identity(), 1.1, 3.0);
  const Pose c = perturb(rng, Pose::identity(), 0.4, 1.0);
  CHECK(chain_pose(a, Pose::identity()).matrix() == a.matrix());
  CHECK(chain_pose(Pose::identity(), b).matrix() == b.matrix());
  CHECK((chain_pose(a, b).matrix() - b.matrix() * a.matrix()).norm() < 1e-12);
  CHECK((chain_pose(chain_pose(a, b), c).matrix() - chain_pose(a, c * b).matrix()).norm() < 1e-12);
}

TEST_CASE("refine_pose") {
  std::mt19937_64 rng(7);
  const GaussianMap map = textured_map(rng, 200);
  const Pose truth = perturb(rng, Pose::identity(), 0.02, 0.05);
  const Image target = render(map, truth, kCam).color;

  SUBCASE("already exact") {
    const TrackResult r = refine_pose(map, target, truth, kCam);
    CHECK(r.status == TrackStatus::ok);
    CHECK(r.final_loss == 0.0);
    CHECK(r.pose.matrix() == truth.matrix());
  }
  SUBCASE("converges from a small perturbation") {
    for (int trial = 0; trial < 3; ++trial) {
      const Pose init = perturb(rng, truth, 0.5 * M_PI / 180.0, 0.02);
      const TrackResult r = refine_pose(map, target, init, kCam);
      CHECK(r.status == TrackStatus::ok);
      CHECK(r.refine_iters_used <= 100);
      CHECK(r.final_loss <= r.initial_loss);
      CHECK(rotation_error_rad(r.pose, truth) * 180.0 / M_PI < 0.05);
      CHECK(translation_error(r.pose, truth) < 0.005);
    }
  }
  SUBCASE("nothing visible") {
    Pose away = truth;
    away.rotation = Eigen::AngleAxisd(M_PI, Eigen::Vector3d::UnitY()).toRotationMatrix() * truth.rotation;
    const TrackResult r = refine_pose(map, target, away, kCam);
    CHECK(r.status == TrackStatus::diverged);
    CHECK(r.pose.matrix() == away.matrix());
  }
  SUBCASE("never ends above the starting loss") {
    for (int trial = 0; trial < 3; ++trial) {
      const Pose init = perturb(rng, truth, 0.05, 0.3);
      RefineOptions o;
      o.max_iters = 15;
      const TrackResult r = refine_pose(map, target, init, kCam, o);
      CHECK(r.final_loss <= r.initial_loss);
    }
  }
}
