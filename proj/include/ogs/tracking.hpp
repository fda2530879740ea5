#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "ogs/geometry.hpp"
#include "ogs/image.hpp"
#include "ogs/pointmap.hpp"
#include "ogs/rasterizer.hpp"
#include "ogs/scene.hpp"

namespace ogs {

struct PnpOptions {
  double inlier_px = 2.0;
  int max_iterations = 500;
  double confidence = 0.99;
  std::size_t min_inliers = 12;
  double min_inlier_ratio = 0.2;
};

struct PnpResult {
  Pose pose;  // maps the points' frame into the camera
  std::vector<std::uint8_t> inliers;
  std::size_t inlier_count = 0;
  int iterations = 0;
};

/// RANSAC over 6-point DLT hypotheses with confidence-weighted sampling,
/// followed by Gauss-Newton refinement of the reprojection error on the
/// consensus set. Throws DegenerateInput below 6 points and PnpDegenerate
/// when the consensus is too small.
PnpResult pnp_ransac(std::span<const Eigen::Vector3d> points, std::span<const Eigen::Vector2d> pixels,
                     const CameraIntrinsics& K, std::span<const double> weights, std::uint64_t seed,
                     const PnpOptions& options = {});

struct RelativePoseOptions {
  std::size_t max_correspondences = 4096;
  std::uint64_t seed = 0;
  PnpOptions pnp;
};

struct RelativePose {
  Pose T_trans;  // frame a camera -> frame b camera, in the pair's scale
  std::size_t correspondences = 0;
  std::size_t inliers = 0;
};

/// Pairs each valid X2 point with its own pixel in image b and solves PnP.
RelativePose estimate_relative_pose(const PointmapPair& pair, const CameraIntrinsics& K,
                                    const RelativePoseOptions& options = {});

/// T_k = T_trans * T_{k-1}.
inline Pose chain_pose(const Pose& T_prev, const Pose& T_trans) { return T_trans * T_prev; }

enum class TrackStatus { ok, pnp_degenerate, diverged };

const char* to_string(TrackStatus s);

struct TrackResult {
  Pose pose;
  std::size_t inlier_count = 0;
  int refine_iters_used = 0;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  TrackStatus status = TrackStatus::ok;
};

struct RefineOptions {
  int max_iters = 100;
  double step_rot = 3e-4;    // radians per iteration
  double step_trans = 1e-3;  // scene units per iteration
  double momentum = 0.9;
  double min_alpha = 0.1;    // pixels less covered than this are ignored
  double rel_tol = 1e-5;
  int patience = 10;
  Eigen::Vector3d background = Eigen::Vector3d::Zero();
  int threads = 1;
};

/// Photometric pose refinement by momentum descent on the left se(3)
/// increment. Returns the best pose seen, so the loss never ends above the
/// starting loss.
/// Mean rendered depth over pixels with accumulated alpha >= min_alpha (0 if none).
double mean_depth(const RenderOutput& out, double min_alpha = 0.5);

TrackResult refine_pose(const GaussianMap& map, const Image& image, const Pose& T_init, const CameraIntrinsics& K,
                        const RefineOptions& options = {});

/// Momentum descent on a pose with the rotation and translation blocks each
/// normalized by the running RMS of their gradient norm, so step lengths are
/// in radians and scene units. Rotations turn about a pivot given in camera
/// coordinates; a pivot at the depth of the observed content decouples
/// rotation from the translation that shifts the image the same way.
/// Shared by tracking and window optimization.
class PoseStepper {
 public:
  PoseStepper(double step_rot, double step_trans, double momentum)
      : step_rot_(step_rot), step_trans_(step_trans), momentum_(momentum) {}
  /// Returns the updated pose exp(-step) * T; grad is the usual left-increment gradient.
  Pose step(const Pose& T, const Twist& grad, const Eigen::Vector3d& pivot = Eigen::Vector3d::Zero());
  /// Forgets the smoothed direction (not the gradient scale).
  void reset_momentum() {
    m_ = Twist{};
    t_m_ = 0;
  }

 private:
  static constexpr double kSecondMoment = 0.999;
  double step_rot_, step_trans_, momentum_;
  Twist m_;
  double v_rot_ = 0.0, v_trans_ = 0.0;
  int t_ = 0;
  int t_m_ = 0;  // steps since the last momentum reset
};

}  // namespace ogs
