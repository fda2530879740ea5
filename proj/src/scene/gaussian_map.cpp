#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ogs/errors.hpp"
#include "ogs/geometry.hpp"
#include "ogs/scene.hpp"

namespace ogs {

GaussianParams GaussianParams::zeros() {
  GaussianParams p;
  p.rot.setZero();
  return p;
}

bool GaussianParams::all_finite() const {
  return mean.allFinite() && rot.allFinite() && log_scale.allFinite() && std::isfinite(opacity_logit) &&
         color.allFinite();
}

GaussianParams& GaussianParams::operator+=(const GaussianParams& o) {
  mean += o.mean;
  rot += o.rot;
  log_scale += o.log_scale;
  opacity_logit += o.opacity_logit;
  color += o.color;
  return *this;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double logit(double p) { return std::log(p / (1.0 - p)); }

double Gaussian3D::opacity() const { return sigmoid(opacity_logit); }

Eigen::Vector3d Gaussian3D::scale() const { return log_scale.array().exp(); }

Eigen::Matrix3d Gaussian3D::covariance() const { return covariance_from_params(rot, log_scale); }

Eigen::Matrix3d covariance_from_params(const Eigen::Vector4d& rot, const Eigen::Vector3d& log_scale) {
  const Eigen::Matrix3d R = quat_to_rot(rot);
  const Eigen::Vector3d s2 = (2.0 * log_scale).array().exp();
  return R * s2.asDiagonal() * R.transpose();
}

double eval_gaussian(const Gaussian3D& g, const Eigen::Vector3d& x) {
  // Sigma^-1 = R S^-2 R^T, so the Mahalanobis term is a sum over the local axes.
  const Eigen::Matrix3d R = quat_to_rot(g.rot);
  const Eigen::Vector3d local = R.transpose() * (x - g.mean);
  const Eigen::Vector3d inv_s2 = (-2.0 * g.log_scale).array().exp();
  const double m2 = local.cwiseProduct(local).dot(inv_s2);
  return std::exp(-0.5 * m2);
}

void GaussianMap::add(const Gaussian3D& g) {
  gaussians_.push_back(g);
  grads_.push_back(GaussianParams::zeros());
  moment1_.push_back(GaussianParams::zeros());
  moment2_.push_back(GaussianParams::zeros());
  steps_.push_back(0);
  ++revision_;
}

Gaussian3D& GaussianMap::mutable_gaussian(std::size_t i) {
  ++revision_;
  return gaussians_.at(i);
}

std::vector<Gaussian3D>& GaussianMap::mutable_gaussians() {
  ++revision_;
  return gaussians_;
}

void GaussianMap::zero_grad() { std::fill(grads_.begin(), grads_.end(), GaussianParams::zeros()); }

std::vector<double> mean_knn_distance(std::span<const Eigen::Vector3d> points, int k) {
  const std::size_t n = points.size();
  std::vector<double> out(n, 0.0);
  if (n < 2) return out;

  // Sweep over points sorted by x; stop once the x gap alone exceeds the
  // current k-th best distance.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return points[a].x() < points[b].x(); });

  const std::size_t kk = std::min<std::size_t>(static_cast<std::size_t>(k), n - 1);
  std::vector<double> best;
  for (std::size_t r = 0; r < n; ++r) {
    const Eigen::Vector3d& p = points[order[r]];
    best.assign(kk, std::numeric_limits<double>::infinity());
    auto consider = [&](std::size_t other) {
      const double d2 = (points[other] - p).squaredNorm();
      if (d2 < best.back()) {
        best.back() = d2;
        std::sort(best.begin(), best.end());
      }
    };
    for (std::size_t s = r + 1; s < n; ++s) {
      const double dx = points[order[s]].x() - p.x();
      if (dx * dx > best.back()) break;
      consider(order[s]);
    }
    for (std::size_t s = r; s-- > 0;) {
      const double dx = p.x() - points[order[s]].x();
      if (dx * dx > best.back()) break;
      consider(order[s]);
    }
    double sum = 0.0;
    for (double d2 : best) sum += std::sqrt(d2);
    out[order[r]] = sum / static_cast<double>(kk);
  }
  return out;
}

InsertResult GaussianMap::insert_from_points(std::span<const Eigen::Vector3d> points,
                                             std::span<const Eigen::Vector3d> colors, int keyframe_idx) {
  if (points.size() != colors.size()) {
    throw InvalidArgument("insert_from_points: points and colors differ in length");
  }
  InsertResult result;
  std::vector<Eigen::Vector3d> kept_points;
  std::vector<Eigen::Vector3d> kept_colors;
  kept_points.reserve(points.size());
  kept_colors.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!points[i].allFinite() || !colors[i].allFinite()) {
      ++result.skipped;
      continue;
    }
    kept_points.push_back(points[i]);
    kept_colors.push_back(colors[i]);
  }
  if (kept_points.empty()) return result;

  const std::vector<double> knn = mean_knn_distance(kept_points, 3);
  const double initial_logit = logit(0.5);
  for (std::size_t i = 0; i < kept_points.size(); ++i) {
    const double s = kept_points.size() == 1 ? kIsolatedPointScale
                                              : std::clamp(knn[i], kMinInitScale, kMaxInitScale);
    Gaussian3D g;
    g.mean = kept_points[i];
    g.rot = Eigen::Vector4d(1.0, 0.0, 0.0, 0.0);
    g.log_scale = Eigen::Vector3d::Constant(std::log(s));
    g.opacity_logit = initial_logit;
    g.color = kept_colors[i];
    g.created_at = keyframe_idx;
    add(g);
  }
  result.inserted = kept_points.size();
  return result;
}

std::size_t GaussianMap::remove_if(const std::function<bool(const Gaussian3D&)>& pred) {
  std::size_t w = 0;
  const std::size_t n = gaussians_.size();
  for (std::size_t r = 0; r < n; ++r) {
    if (pred(gaussians_[r])) continue;
    if (w != r) {
      gaussians_[w] = gaussians_[r];
      grads_[w] = grads_[r];
      moment1_[w] = moment1_[r];
      moment2_[w] = moment2_[r];
      steps_[w] = steps_[r];
    }
    ++w;
  }
  const std::size_t removed = n - w;
  if (removed > 0) {
    gaussians_.resize(w);
    grads_.resize(w);
    moment1_.resize(w);
    moment2_.resize(w);
    steps_.resize(w);
    ++revision_;
  }
  return removed;
}

std::size_t GaussianMap::prune(int current_kf, double min_opacity, int min_age) {
  return remove_if([&](const Gaussian3D& g) {
    return g.opacity() < min_opacity && current_kf - g.created_at >= min_age;
  });
}

std::size_t GaussianMap::drop_non_finite() {
  return remove_if([](const Gaussian3D& g) {
    return !g.all_finite() || !(g.rot.norm() > 1e-12);
  });
}

}  // namespace ogs
