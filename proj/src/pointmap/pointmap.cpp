#include <cmath>
#include <limits>
#include <random>

#include "ogs/errors.hpp"
#include "ogs/pointmap.hpp"

namespace ogs {

PointmapPair PointmapPair::empty(std::uint64_t frame_a, std::uint64_t frame_b, int width, int height) {
  if (width <= 0 || height <= 0) throw InvalidArgument("PointmapPair: non-positive size");
  PointmapPair p;
  p.frame_a = frame_a;
  p.frame_b = frame_b;
  p.width = width;
  p.height = height;
  const std::size_t n = p.pixel_count();
  const Eigen::Vector3f nan = Eigen::Vector3f::Constant(std::numeric_limits<float>::quiet_NaN());
  p.X1.assign(n, nan);
  p.X2.assign(n, nan);
  p.conf1.assign(n, 0.0f);
  p.conf2.assign(n, 0.0f);
  p.valid1.assign(n, 0);
  p.valid2.assign(n, 0);
  return p;
}

void PointmapPair::derive_masks() {
  const std::size_t n = pixel_count();
  valid1.assign(n, 0);
  valid2.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    valid1[i] = X1[i].allFinite() ? 1 : 0;
    valid2[i] = X2[i].allFinite() ? 1 : 0;
    if (!valid1[i]) conf1[i] = 0.0f;
    if (!valid2[i]) conf2[i] = 0.0f;
  }
}

namespace {

// Nearest depth per pixel as seen from T, or +inf.
std::vector<double> depth_buffer(const SceneCloud& scene, const Pose& T, const CameraIntrinsics& K,
                                 double point_radius) {
  if (!scene.normals.empty() && scene.normals.size() != scene.points.size()) {
    throw InvalidArgument("synth_pair: normals do not match points");
  }
  std::vector<double> zbuf(static_cast<std::size_t>(K.width) * K.height, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < scene.points.size(); ++i) {
    const Eigen::Vector3d pc = T.apply(scene.points[i]);
    const Eigen::Vector3d n = scene.normals.empty() ? Eigen::Vector3d::Zero().eval() : (T.rotation * scene.normals[i]).eval();
    if (!(pc.z() >= kNearPlane)) continue;
    const Eigen::Vector2d uv = K.project(pc);
    const double r = point_radius * std::max(K.fx, K.fy) / pc.z();
    const int x0 = static_cast<int>(std::ceil(uv.x() - r - 0.5)), x1 = static_cast<int>(std::floor(uv.x() + r + 0.5));
    const int y0 = static_cast<int>(std::ceil(uv.y() - r - 0.5)), y1 = static_cast<int>(std::floor(uv.y() + r + 0.5));
    for (int y = std::max(y0, 0); y <= std::min(y1, K.height - 1); ++y) {
      for (int x = std::max(x0, 0); x <= std::min(x1, K.width - 1); ++x) {
        // Inside the disc of radius r, or the pixel whose cell holds the point.
        const double dx = x - uv.x(), dy = y - uv.y();
        const bool own_cell = std::abs(dx) <= 0.5 && std::abs(dy) <= 0.5;
        if (!own_cell && dx * dx + dy * dy > r * r) continue;
        // Depth of the pixel ray's hit on the tangent plane; near-grazing hits
        // are unreliable and keep the point's own depth.
        double hit = pc.z();
        const Eigen::Vector3d d((x - K.cx) / K.fx, (y - K.cy) / K.fy, 1.0);
        const double nd = n.dot(d);
        if (std::abs(nd) > 0.2 * d.norm()) {
          const double zt = n.dot(pc) / nd;
          if (std::abs(zt - pc.z()) < 0.5 * pc.z()) hit = zt;
        }
        double& z = zbuf[static_cast<std::size_t>(y) * K.width + x];
        z = std::min(z, hit);
      }
    }
  }
  return zbuf;
}

}  // namespace

PointmapPair synth_pair(const SceneCloud& scene, const Pose& T_a, const Pose& T_b, const CameraIntrinsics& K,
                        std::uint64_t frame_a, std::uint64_t frame_b, const SynthPairOptions& options) {
  K.validate();
  if (options.noise_sigma < 0.0) throw InvalidArgument("synth_pair: negative noise");
  PointmapPair pair = PointmapPair::empty(frame_a, frame_b, K.width, K.height);
  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> noise(0.0, 1.0);

  auto fill = [&](const Pose& T_src, std::vector<Eigen::Vector3f>& X, std::vector<float>& conf) {
    const std::vector<double> zbuf = depth_buffer(scene, T_src, K, options.point_radius);
    const Pose to_a = T_a * T_src.inverse();
    for (int y = 0; y < K.height; ++y) {
      for (int x = 0; x < K.width; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * K.width + x;
        if (!std::isfinite(zbuf[i])) continue;
        Eigen::Vector3d p = to_a.apply(K.unproject(x, y, zbuf[i]));
        if (options.noise_sigma > 0.0) {
          for (int k = 0; k < 3; ++k) p[k] += options.noise_sigma * noise(rng);
        }
        X[i] = p.cast<float>();
        conf[i] = 1.0f;
      }
    }
  };
  fill(T_a, pair.X1, pair.conf1);
  fill(T_b, pair.X2, pair.conf2);
  pair.derive_masks();
  return pair;
}

}  // namespace ogs
