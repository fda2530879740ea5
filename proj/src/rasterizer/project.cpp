#include <algorithm>
#include <cmath>

#include "ogs/errors.hpp"
#include "ogs/rasterizer.hpp"

namespace ogs {

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0) || width <= 0 || height <= 0 || !std::isfinite(cx) || !std::isfinite(cy)) {
    throw InvalidArgument("CameraIntrinsics: focal lengths and image size must be positive");
  }
}

std::optional<ProjectedSplat> project_splat(const Gaussian3D& g, std::size_t index, const Pose& T_cw,
                                            const CameraIntrinsics& K) {
  const Eigen::Vector3d mc = T_cw.apply(g.mean);
  if (!(mc.z() >= kNearPlane)) return std::nullopt;

  const double opacity = g.opacity();
  // Beyond this Mahalanobis radius alpha stays below kAlphaMin.
  const double q_max = 2.0 * std::log(255.0 * opacity);
  if (!(q_max > 0.0)) return std::nullopt;

  ProjectedSplat p;
  p.mean_cam = mc;
  p.opacity = opacity;
  p.color = g.color;
  p.cov_world = g.covariance();
  const Eigen::Matrix3d& W = T_cw.rotation;
  p.cov_cam = W * p.cov_world * W.transpose();

  const double x = mc.x(), y = mc.y(), z = mc.z();
  const double iz = 1.0 / z;
  p.jacobian << K.fx * iz, 0.0, -K.fx * x * iz * iz,
                0.0, K.fy * iz, -K.fy * y * iz * iz;

  Eigen::Matrix2d cov2d = p.jacobian * p.cov_cam * p.jacobian.transpose();
  cov2d(0, 1) = cov2d(1, 0) = 0.5 * (cov2d(0, 1) + cov2d(1, 0));
  cov2d(0, 0) += kCovDilation;
  cov2d(1, 1) += kCovDilation;
  const double det = cov2d(0, 0) * cov2d(1, 1) - cov2d(0, 1) * cov2d(0, 1);
  if (!(det > 0.0)) return std::nullopt;

  p.splat.mean2d = K.project(mc);
  p.splat.cov2d = cov2d;
  p.splat.depth = z;
  p.splat.source_idx = index;
  p.conic = Eigen::Vector3d(cov2d(1, 1) / det, -cov2d(0, 1) / det, cov2d(0, 0) / det);

  const double ex = std::sqrt(q_max * cov2d(0, 0));
  const double ey = std::sqrt(q_max * cov2d(1, 1));
  const Eigen::Vector2d& m = p.splat.mean2d;
  if (!std::isfinite(ex) || !std::isfinite(ey) || !m.allFinite()) return std::nullopt;
  if (m.x() + ex < 0.0 || m.x() - ex > K.width - 1 || m.y() + ey < 0.0 || m.y() - ey > K.height - 1) {
    return std::nullopt;
  }
  p.px_min = static_cast<int>(std::max(0.0, std::ceil(m.x() - ex)));
  p.px_max = static_cast<int>(std::min<double>(K.width - 1, std::floor(m.x() + ex)));
  p.py_min = static_cast<int>(std::max(0.0, std::ceil(m.y() - ey)));
  p.py_max = static_cast<int>(std::min<double>(K.height - 1, std::floor(m.y() + ey)));
  if (p.px_min > p.px_max || p.py_min > p.py_max) return std::nullopt;
  return p;
}

std::vector<std::uint32_t> visible_gaussians(const GaussianMap& map, const Pose& T_cw,
                                             const CameraIntrinsics& K) {
  std::vector<std::uint32_t> out;
  for (std::size_t i = 0; i < map.size(); ++i) {
    if (project_splat(map[i], i, T_cw, K)) out.push_back(static_cast<std::uint32_t>(i));
  }
  return out;
}

}  // namespace ogs
