#include <algorithm>
#include <array>

#include "ogs/detail/parallel.hpp"
#include "ogs/errors.hpp"
#include "ogs/rasterizer.hpp"

namespace ogs {

namespace {

// Per-splat gradient in image space: mean2d (2), conic a/b/c (3), opacity (1), color (3).
using Grad2D = std::array<double, 9>;

void check_shapes(const RenderOutput& out, const Image& dL_dcolor) {
  if (dL_dcolor.width != out.color.width || dL_dcolor.height != out.color.height || dL_dcolor.channels != 3) {
    throw InvalidArgument("backward: dL_dcolor does not match the rendered image");
  }
  if (out.record_begin.size() != out.color.pixel_count()) {
    throw InvalidState("backward: render output carries no blend records");
  }
}

std::vector<Grad2D> image_space_grads(const RenderOutput& out, const Image& dL_dcolor, int threads) {
  const int W = out.intrinsics.width, H = out.intrinsics.height;
  const int tx_count = out.tiles_x();
  std::vector<std::vector<double>> per_tile(out.tile_splats.size());
  struct Packed {
    double mx, my, ca, cb, cc, opacity;
    Eigen::Vector3d color;
  };
  std::vector<Packed> packed(out.splats.size());
  for (std::size_t i = 0; i < packed.size(); ++i) {
    const ProjectedSplat& p = out.splats[i];
    packed[i] = {p.splat.mean2d.x(), p.splat.mean2d.y(), p.conic[0], p.conic[1], p.conic[2], p.opacity, p.color};
  }

  detail::parallel_for(out.tile_splats.size(), threads, [&](std::size_t t) {
    const std::vector<std::uint32_t>& list = out.tile_splats[t];
    std::vector<double>& buf = per_tile[t];
    buf.assign(list.size() * 9, 0.0);
    const int tx = static_cast<int>(t) % tx_count, ty = static_cast<int>(t) / tx_count;
    const int x0 = tx * kTileSize, y0 = ty * kTileSize;
    const int x1 = std::min(x0 + kTileSize, W), y1 = std::min(y0 + kTileSize, H);
    for (int y = y0; y < y1; ++y) {
      for (int x = x0; x < x1; ++x) {
        const std::size_t pix = static_cast<std::size_t>(y) * W + x;
        const Eigen::Vector3d g(dL_dcolor.at(x, y, 0), dL_dcolor.at(x, y, 1), dL_dcolor.at(x, y, 2));
        if (g.isZero(0.0)) continue;
        const std::uint32_t begin = out.record_begin[pix];
        // Composite of everything behind the current record, including background.
        Eigen::Vector3d behind = out.background;
        for (std::uint32_t k = out.record_count[pix]; k-- > 0;) {
          const BlendRecord& r = out.records[begin + k];
          const Packed& p = packed[list[r.slot]];
          double* gs = &buf[static_cast<std::size_t>(r.slot) * 9];
          const double w = r.alpha * r.transmittance;
          gs[6] += g[0] * w;
          gs[7] += g[1] * w;
          gs[8] += g[2] * w;
          const double g_alpha = r.transmittance * g.dot(p.color - behind);
          behind = r.alpha * p.color + (1.0 - r.alpha) * behind;

          gs[5] += g_alpha * r.alpha / p.opacity;
          const double g_power = g_alpha * r.alpha;
          const double dx = x - p.mx, dy = y - p.my;
          // power = -0.5 (a dx^2 + 2 b dx dy + c dy^2), d = pixel - mean.
          gs[0] += g_power * (p.ca * dx + p.cb * dy);
          gs[1] += g_power * (p.cb * dx + p.cc * dy);
          gs[2] += g_power * (-0.5 * dx * dx);
          gs[3] += g_power * (-dx * dy);
          gs[4] += g_power * (-0.5 * dy * dy);
        }
      }
    }
  });

  std::vector<Grad2D> grads(out.splats.size(), Grad2D{});
  for (std::size_t t = 0; t < per_tile.size(); ++t) {
    const std::vector<std::uint32_t>& list = out.tile_splats[t];
    for (std::size_t slot = 0; slot < list.size(); ++slot) {
      Grad2D& dst = grads[list[slot]];
      for (int k = 0; k < 9; ++k) dst[k] += per_tile[t][slot * 9 + k];
    }
  }
  return grads;
}

// d R(q) / d q_i for a unit quaternion (w, x, y, z).
std::array<Eigen::Matrix3d, 4> rotation_quat_jacobian(const Eigen::Vector4d& q) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  std::array<Eigen::Matrix3d, 4> d;
  d[0] << 0, -2 * z, 2 * y,
          2 * z, 0, -2 * x,
          -2 * y, 2 * x, 0;
  d[1] << 0, 2 * y, 2 * z,
          2 * y, -4 * x, -2 * w,
          2 * z, 2 * w, -4 * x;
  d[2] << -4 * y, 2 * x, 2 * w,
          2 * x, 0, 2 * z,
          -2 * w, 2 * z, -4 * y;
  d[3] << -4 * z, -2 * w, 2 * x,
          2 * w, -4 * z, 2 * y,
          2 * x, 2 * y, 0;
  return d;
}

}  // namespace

Twist backward(const RenderOutput& out, const Image& dL_dcolor, GaussianMap* map, int threads) {
  check_shapes(out, dL_dcolor);
  if (map != nullptr && (map->revision() != out.map_revision || map->size() != out.map_size)) {
    throw InvalidState("backward: the map changed since the forward pass");
  }
  const std::vector<Grad2D> g2 = image_space_grads(out, dL_dcolor, threads);
  const CameraIntrinsics& K = out.intrinsics;
  const Eigen::Matrix3d& W = out.pose.rotation;

  Twist pose_grad;
  for (std::size_t s = 0; s < out.splats.size(); ++s) {
    const Grad2D& g = g2[s];
    if (std::all_of(g.begin(), g.end(), [](double v) { return v == 0.0; })) continue;
    const ProjectedSplat& p = out.splats[s];

    // conic -> 2D covariance: dL/dSigma = -Q G_Q Q.
    Eigen::Matrix2d Q;
    Q << p.conic[0], p.conic[1], p.conic[1], p.conic[2];
    Eigen::Matrix2d G_Q;
    G_Q << g[2], 0.5 * g[3], 0.5 * g[3], g[4];
    const Eigen::Matrix2d G_S2 = -Q * G_Q * Q;

    // Sigma_I = J M J^T (+ dilation).
    const Eigen::Matrix<double, 2, 3>& J = p.jacobian;
    const Eigen::Matrix3d G_M = J.transpose() * G_S2 * J;
    const Eigen::Matrix<double, 2, 3> G_J = 2.0 * G_S2 * J * p.cov_cam;

    const double x = p.mean_cam.x(), y = p.mean_cam.y(), z = p.mean_cam.z();
    const double iz2 = 1.0 / (z * z), iz3 = iz2 / z;
    Eigen::Vector3d g_mc = J.transpose() * Eigen::Vector2d(g[0], g[1]);
    g_mc.x() += G_J(0, 2) * (-K.fx * iz2);
    g_mc.y() += G_J(1, 2) * (-K.fy * iz2);
    g_mc.z() += G_J(0, 0) * (-K.fx * iz2) + G_J(0, 2) * (2.0 * K.fx * x * iz3) + G_J(1, 1) * (-K.fy * iz2) +
                G_J(1, 2) * (2.0 * K.fy * y * iz3);

    // Left increment: d mu_C = omega x mu_C + nu, d W = [omega]x W.
    pose_grad.nu += g_mc;
    pose_grad.omega += p.mean_cam.cross(g_mc);
    const Eigen::Matrix3d A = p.cov_cam * G_M - G_M * p.cov_cam;
    pose_grad.omega += 2.0 * Eigen::Vector3d(A(1, 2), A(2, 0), A(0, 1));

    if (map == nullptr) continue;
    const Gaussian3D& gs = (*map)[p.splat.source_idx];
    GaussianParams& dst = map->grads()[p.splat.source_idx];

    dst.mean += W.transpose() * g_mc;
    dst.color += Eigen::Vector3d(g[6], g[7], g[8]);
    dst.opacity_logit += g[5] * p.opacity * (1.0 - p.opacity);

    // Sigma_W = R S^2 R^T.
    const Eigen::Matrix3d G_SW = W.transpose() * G_M * W;
    const double qn = gs.rot.norm();
    const Eigen::Vector4d qu = gs.rot / qn;
    const Eigen::Matrix3d R = quat_to_rot(qu);
    const Eigen::Vector3d s2 = (2.0 * gs.log_scale).array().exp();
    const Eigen::Matrix3d RtGR = R.transpose() * G_SW * R;
    for (int k = 0; k < 3; ++k) dst.log_scale[k] += 2.0 * s2[k] * RtGR(k, k);

    const Eigen::Matrix3d G_R = 2.0 * G_SW * R * s2.asDiagonal();
    const auto dR = rotation_quat_jacobian(qu);
    Eigen::Vector4d g_qu;
    for (int k = 0; k < 4; ++k) g_qu[k] = (G_R.array() * dR[k].array()).sum();
    dst.rot += (g_qu - qu * qu.dot(g_qu)) / qn;
  }
  return pose_grad;
}

void backward_gaussians(const RenderOutput& out, const Image& dL_dcolor, GaussianMap& map) {
  backward(out, dL_dcolor, &map);
}

Twist backward_pose(const RenderOutput& out, const Image& dL_dcolor, const Pose& T_cw,
                    const CameraIntrinsics& K) {
  const bool same_pose = (T_cw.rotation.array() == out.pose.rotation.array()).all() &&
                         (T_cw.translation.array() == out.pose.translation.array()).all();
  const bool same_k = K.fx == out.intrinsics.fx && K.fy == out.intrinsics.fy && K.cx == out.intrinsics.cx &&
                      K.cy == out.intrinsics.cy && K.width == out.intrinsics.width &&
                      K.height == out.intrinsics.height;
  if (!same_pose || !same_k) throw InvalidState("backward_pose: pose or intrinsics differ from the forward pass");
  return backward(out, dL_dcolor, nullptr);
}

}  // namespace ogs
