#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "ogs/geometry.hpp"
#include "ogs/image.hpp"
#include "ogs/scene.hpp"

namespace ogs {

/// Pinhole camera. Pixel (u, v) has its center at image coordinates (u, v).
struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  void validate() const;
  Eigen::Vector2d project(const Eigen::Vector3d& p_cam) const {
    return {fx * p_cam.x() / p_cam.z() + cx, fy * p_cam.y() / p_cam.z() + cy};
  }
  /// Point on the ray through pixel (u, v) at camera depth z.
  Eigen::Vector3d unproject(double u, double v, double z) const {
    return {(u - cx) / fx * z, (v - cy) / fy * z, z};
  }
};

inline constexpr double kNearPlane = 0.2;
inline constexpr double kCovDilation = 0.3;
inline constexpr double kAlphaMin = 1.0 / 255.0;
inline constexpr double kMinTransmittance = 1e-4;
inline constexpr int kTileSize = 16;

struct Splat2D {
  Eigen::Vector2d mean2d = Eigen::Vector2d::Zero();
  Eigen::Matrix2d cov2d = Eigen::Matrix2d::Identity();
  double depth = 0.0;
  std::size_t source_idx = 0;
};

/// Everything the backward pass needs about one projected Gaussian.
struct ProjectedSplat {
  Splat2D splat;
  Eigen::Vector3d mean_cam;
  Eigen::Matrix3d cov_world;  // Sigma_W
  Eigen::Matrix3d cov_cam;    // W Sigma_W W^T
  Eigen::Matrix<double, 2, 3> jacobian;
  Eigen::Vector3d conic;      // upper triangle of cov2d^-1: (a, b, c)
  double opacity = 0.0;
  Eigen::Vector3d color;
  int px_min = 0, px_max = -1, py_min = 0, py_max = -1;  // influenced pixel box
};

/// Projects one Gaussian. Culled (nullopt) when behind the near plane or when
/// its footprint, the ellipse where its alpha can still reach kAlphaMin, lies
/// entirely outside the image.
std::optional<ProjectedSplat> project_splat(const Gaussian3D& g, std::size_t index, const Pose& T_cw,
                                            const CameraIntrinsics& K);

inline std::optional<Splat2D> project_gaussian(const Gaussian3D& g, const Pose& T_cw,
                                               const CameraIntrinsics& K) {
  if (auto p = project_splat(g, 0, T_cw, K)) return p->splat;
  return std::nullopt;
}

/// Indices of Gaussians that survive projection culling.
std::vector<std::uint32_t> visible_gaussians(const GaussianMap& map, const Pose& T_cw,
                                             const CameraIntrinsics& K);

struct BlendRecord {
  std::uint32_t slot;     // position in the tile's depth-sorted splat list
  double alpha;           // alpha_i at this pixel
  double transmittance;   // product of (1 - alpha_j) over earlier splats
};

struct RenderOutput {
  Image color;          // H x W x 3
  Image alpha;          // accumulated opacity, sum of blend weights
  Image depth;          // alpha-weighted depth (not normalized)
  Image transmittance;  // final transmittance per pixel

  std::vector<ProjectedSplat> splats;
  std::vector<std::vector<std::uint32_t>> tile_splats;  // per tile, indices into splats
  std::vector<std::uint32_t> record_begin;               // per pixel
  std::vector<std::uint32_t> record_count;               // per pixel
  std::vector<BlendRecord> records;

  Pose pose;
  CameraIntrinsics intrinsics;
  Eigen::Vector3d background = Eigen::Vector3d::Zero();
  std::uint64_t map_revision = 0;
  std::size_t map_size = 0;

  int tiles_x() const { return (intrinsics.width + kTileSize - 1) / kTileSize; }
  int tiles_y() const { return (intrinsics.height + kTileSize - 1) / kTileSize; }
  /// Source Gaussian index of a blend record belonging to pixel (x, y).
  std::size_t source_of(int x, int y, const BlendRecord& r) const;
};

struct RenderOptions {
  Eigen::Vector3d background = Eigen::Vector3d::Zero();
  int threads = 1;  // 0 = hardware concurrency; output does not depend on it
};

RenderOutput render(const GaussianMap& map, const Pose& T_cw, const CameraIntrinsics& K,
                    const RenderOptions& options = {});

/// Mean absolute difference over all pixels and channels.
double photometric_loss(const RenderOutput& rendered, const Image& target);

struct PhotometricGrad {
  double loss = 0.0;
  Image dL_dcolor;
  std::size_t active_pixels = 0;
};

/// L1 loss and its gradient with respect to the rendered color. When
/// min_alpha > 0 only pixels with accumulated alpha >= min_alpha count, and
/// the mean is taken over those.
PhotometricGrad photometric_loss_grad(const RenderOutput& rendered, const Image& target,
                                      double min_alpha = 0.0);

/// Reverse-mode gradients of a scalar loss with respect to every parameter of
/// every contributing Gaussian, accumulated into map.grads().
void backward_gaussians(const RenderOutput& out, const Image& dL_dcolor, GaussianMap& map);

/// Gradient with respect to a left-multiplied se(3) increment, T <- exp(xi) T.
Twist backward_pose(const RenderOutput& out, const Image& dL_dcolor, const Pose& T_cw,
                    const CameraIntrinsics& K);

/// Both of the above in one pass. map may be null for a pose-only pass.
Twist backward(const RenderOutput& out, const Image& dL_dcolor, GaussianMap* map, int threads = 1);

}  // namespace ogs
