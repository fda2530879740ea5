#include <algorithm>
#include <cmath>
#include <map>

#include <Eigen/Geometry>

#include "ogs/errors.hpp"
#include "ogs/metrics.hpp"

namespace ogs {

Trajectory associate_by_timestamp(const Trajectory& est, const Trajectory& gt, double tol) {
  Trajectory out;
  for (const auto& e : est) {
    const auto it = std::min_element(gt.begin(), gt.end(), [&](const auto& a, const auto& b) {
      return std::abs(a.timestamp - e.timestamp) < std::abs(b.timestamp - e.timestamp);
    });
    if (it == gt.end() || std::abs(it->timestamp - e.timestamp) > tol) continue;
    TrajectoryEntry m = e;
    m.frame_idx = it->frame_idx;
    out.push_back(m);
  }
  return out;
}

double ate_rmse(const Trajectory& est, const Trajectory& gt, AlignMode mode) {
  std::map<int, Eigen::Vector3d> gt_centers;
  for (const auto& g : gt) gt_centers[g.frame_idx] = g.T_cw.center();
  std::vector<Eigen::Vector3d> src, dst;
  for (const auto& e : est) {
    if (const auto it = gt_centers.find(e.frame_idx); it != gt_centers.end()) {
      src.push_back(e.T_cw.center());
      dst.push_back(it->second);
    }
  }
  if (src.size() < 3) throw InvalidArgument("ate_rmse: need at least 3 common frames");
  Eigen::Matrix3Xd S(3, src.size()), D(3, dst.size());
  for (std::size_t i = 0; i < src.size(); ++i) {
    S.col(i) = src[i];
    D.col(i) = dst[i];
  }
  const Eigen::Matrix4d A = Eigen::umeyama(S, D, mode == AlignMode::sim3);
  const Eigen::Matrix3Xd aligned = (A.topLeftCorner<3, 3>() * S).colwise() + A.topRightCorner<3, 1>();
  return std::sqrt((aligned - D).colwise().squaredNorm().mean());
}

double psnr(const Image& a, const Image& b) {
  if (!a.same_shape(b) || a.data.empty()) throw InvalidArgument("psnr: images differ in shape");
  double se = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) se += (a.data[i] - b.data[i]) * (a.data[i] - b.data[i]);
  const double mse = se / static_cast<double>(a.data.size());
  if (mse <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

namespace {

// Separable Gaussian blur of one channel with edge clamping.
std::vector<double> blur(const std::vector<double>& in, int w, int h) {
  constexpr int R = 5;
  double k[2 * R + 1];
  double sum = 0.0;
  for (int i = -R; i <= R; ++i) sum += k[i + R] = std::exp(-(i * i) / (2.0 * 1.5 * 1.5));
  for (double& v : k) v /= sum;
  std::vector<double> tmp(in.size()), out(in.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = -R; i <= R; ++i) s += k[i + R] * in[y * w + std::clamp(x + i, 0, w - 1)];
      tmp[y * w + x] = s;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = -R; i <= R; ++i) s += k[i + R] * tmp[std::clamp(y + i, 0, h - 1) * w + x];
      out[y * w + x] = s;
    }
  return out;
}

}  // namespace

double ssim(const Image& a, const Image& b) {
  if (!a.same_shape(b) || a.data.empty()) throw InvalidArgument("ssim: images differ in shape");
  constexpr double C1 = 0.01 * 0.01, C2 = 0.03 * 0.03;
  const int w = a.width, h = a.height;
  const std::size_t n = a.pixel_count();
  double total = 0.0;
  for (int c = 0; c < a.channels; ++c) {
    std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
    for (std::size_t p = 0; p < n; ++p) {
      x[p] = a.data[p * a.channels + c];
      y[p] = b.data[p * b.channels + c];
      xx[p] = x[p] * x[p];
      yy[p] = y[p] * y[p];
      xy[p] = x[p] * y[p];
    }
    const auto mx = blur(x, w, h), my = blur(y, w, h), sxx = blur(xx, w, h), syy = blur(yy, w, h),
               sxy = blur(xy, w, h);
    double s = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      const double vx = sxx[p] - mx[p] * mx[p], vy = syy[p] - my[p] * my[p], cxy = sxy[p] - mx[p] * my[p];
      s += ((2 * mx[p] * my[p] + C1) * (2 * cxy + C2)) / ((mx[p] * mx[p] + my[p] * my[p] + C1) * (vx + vy + C2));
    }
    total += s / static_cast<double>(n);
  }
  return total / a.channels;
}

}  // namespace ogs
