#include <algorithm>
#include <array>
#include <limits>
#include <cmath>
#include <numeric>
#include <random>

#include <Eigen/Dense>

#include "ogs/errors.hpp"
#include "ogs/tracking.hpp"

namespace ogs {

namespace {

constexpr int kMinimalSample = 6;

// Normalized image coordinates, so the solver works with K = I.
Eigen::Vector2d normalized(const Eigen::Vector2d& px, const CameraIntrinsics& K) {
  return {(px.x() - K.cx) / K.fx, (px.y() - K.cy) / K.fy};
}

// DLT on n >= 6 points. Points are centred and scaled first; the projection
// matrix is then split into a rotation (nearest in Frobenius norm) and a
// translation. Returns false for a degenerate sample.
bool solve_dlt(std::span<const Eigen::Vector3d> X, std::span<const Eigen::Vector2d> x, Pose& out) {
  const std::size_t n = X.size();
  Eigen::Vector3d c = Eigen::Vector3d::Zero();
  for (const auto& p : X) c += p;
  c /= static_cast<double>(n);
  double mean_dist = 0.0;
  for (const auto& p : X) mean_dist += (p - c).norm();
  mean_dist /= static_cast<double>(n);
  if (!(mean_dist > 1e-12)) return false;
  const double s = std::sqrt(3.0) / mean_dist;

  Eigen::MatrixXd A(2 * n, 12);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector3d q = s * (X[i] - c);
    Eigen::Matrix<double, 1, 4> h;
    h << q.transpose(), 1.0;
    A.row(2 * i) << h, Eigen::RowVector4d::Zero(), -x[i].x() * h;
    A.row(2 * i + 1) << Eigen::RowVector4d::Zero(), h, -x[i].y() * h;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
  const Eigen::VectorXd v = svd.matrixV().col(11);
  Eigen::Matrix<double, 3, 4> Pn;
  Pn << v.segment<4>(0).transpose(), v.segment<4>(4).transpose(), v.segment<4>(8).transpose();

  // Undo the point normalization: P = Pn * [s I, -s c; 0 1].
  Eigen::Matrix3d M = s * Pn.leftCols<3>();
  Eigen::Vector3d p4 = Pn.col(3) - M * c;
  if (M.determinant() < 0.0) {
    M = -M;
    p4 = -p4;
  }
  Eigen::JacobiSVD<Eigen::Matrix3d> msvd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const double k = msvd.singularValues().mean();
  if (!(k > 1e-300) || msvd.singularValues()(2) < 1e-9 * msvd.singularValues()(0)) return false;
  out.rotation = msvd.matrixU() * msvd.matrixV().transpose();
  out.translation = p4 / k;
  return out.rotation.allFinite() && out.translation.allFinite();
}

double reprojection_error(const Pose& T, const Eigen::Vector3d& X, const Eigen::Vector2d& px,
                          const CameraIntrinsics& K) {
  const Eigen::Vector3d pc = T.apply(X);
  if (!(pc.z() > 1e-9)) return std::numeric_limits<double>::infinity();
  return (K.project(pc) - px).norm();
}

std::size_t count_inliers(const Pose& T, std::span<const Eigen::Vector3d> X, std::span<const Eigen::Vector2d> px,
                          const CameraIntrinsics& K, double thresh, std::vector<std::uint8_t>* mask) {
  std::size_t n = 0;
  if (mask) mask->assign(X.size(), 0);
  for (std::size_t i = 0; i < X.size(); ++i) {
    if (reprojection_error(T, X[i], px[i], K) < thresh) {
      ++n;
      if (mask) (*mask)[i] = 1;
    }
  }
  return n;
}

// Levenberg-Marquardt on the pixel reprojection error over the masked points,
// parametrized by a left se(3) increment.
Pose refine_reprojection(Pose T, std::span<const Eigen::Vector3d> X, std::span<const Eigen::Vector2d> px,
                         const std::vector<std::uint8_t>& mask, const CameraIntrinsics& K) {
  auto cost = [&](const Pose& P) {
    double c = 0.0;
    for (std::size_t i = 0; i < X.size(); ++i) {
      if (!mask[i]) continue;
      const Eigen::Vector3d pc = P.apply(X[i]);
      if (!(pc.z() > 1e-9)) return std::numeric_limits<double>::infinity();
      c += (K.project(pc) - px[i]).squaredNorm();
    }
    return c;
  };
  double current = cost(T);
  double lambda = 1e-6;
  for (int it = 0; it < 50; ++it) {
    Eigen::Matrix<double, 6, 6> H = Eigen::Matrix<double, 6, 6>::Zero();
    Eigen::Matrix<double, 6, 1> g = Eigen::Matrix<double, 6, 1>::Zero();
    for (std::size_t i = 0; i < X.size(); ++i) {
      if (!mask[i]) continue;
      const Eigen::Vector3d pc = T.apply(X[i]);
      const double iz = 1.0 / pc.z();
      Eigen::Matrix<double, 2, 3> dpi;
      dpi << K.fx * iz, 0.0, -K.fx * pc.x() * iz * iz, 0.0, K.fy * iz, -K.fy * pc.y() * iz * iz;
      Eigen::Matrix<double, 3, 6> dp;
      dp << -skew(pc), Eigen::Matrix3d::Identity();
      const Eigen::Matrix<double, 2, 6> J = dpi * dp;
      const Eigen::Vector2d r = K.project(pc) - px[i];
      H += J.transpose() * J;
      g += J.transpose() * r;
    }
    bool improved = false;
    for (int tries = 0; tries < 10 && !improved; ++tries) {
      Eigen::Matrix<double, 6, 6> Hd = H;
      Hd.diagonal() += lambda * (H.diagonal().array() + 1e-12).matrix();
      const Eigen::Matrix<double, 6, 1> d = -Hd.ldlt().solve(g);
      if (!d.allFinite()) break;
      const Pose cand = se3_exp({d.head<3>(), d.tail<3>()}) * T;
      const double c = cost(cand);
      if (c < current) {
        const double rel = (current - c) / std::max(current, 1e-300);
        T = cand;
        current = c;
        lambda = std::max(lambda * 0.1, 1e-12);
        improved = true;
        if (rel < 1e-15 || d.norm() < 1e-15) return T;
      } else {
        lambda *= 10.0;
      }
    }
    if (!improved) break;
  }
  T.rotation = orthonormalize(T.rotation);
  return T;
}

}  // namespace

PnpResult pnp_ransac(std::span<const Eigen::Vector3d> points, std::span<const Eigen::Vector2d> pixels,
                     const CameraIntrinsics& K, std::span<const double> weights, std::uint64_t seed,
                     const PnpOptions& options) {
  const std::size_t n = points.size();
  if (pixels.size() != n || (!weights.empty() && weights.size() != n)) {
    throw InvalidArgument("pnp_ransac: input lengths differ");
  }
  if (n < static_cast<std::size_t>(kMinimalSample)) {
    throw DegenerateInput("pnp_ransac: " + std::to_string(n) + " correspondences, need at least 6");
  }
  std::vector<double> w(n, 1.0);
  if (!weights.empty()) {
    for (std::size_t i = 0; i < n; ++i) w[i] = std::isfinite(weights[i]) && weights[i] > 0.0 ? weights[i] : 0.0;
  }
  if (std::count_if(w.begin(), w.end(), [](double v) { return v > 0.0; }) < kMinimalSample) {
    throw DegenerateInput("pnp_ransac: fewer than 6 correspondences with positive weight");
  }

  std::vector<Eigen::Vector2d> xn(n);
  for (std::size_t i = 0; i < n; ++i) xn[i] = normalized(pixels[i], K);

  std::mt19937_64 rng(seed);
  std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
  const double thresh = options.inlier_px;

  Pose best;
  std::size_t best_count = 0;
  int needed = options.max_iterations;
  int it = 0;
  std::array<std::size_t, kMinimalSample> idx{};
  std::array<Eigen::Vector3d, kMinimalSample> sX;
  std::array<Eigen::Vector2d, kMinimalSample> sx;
  for (; it < std::min(needed, options.max_iterations); ++it) {
    for (int k = 0; k < kMinimalSample; ++k) {
      std::size_t j;
      int guard = 0;
      do {
        j = pick(rng);
      } while (std::find(idx.begin(), idx.begin() + k, j) != idx.begin() + k && ++guard < 1000);
      idx[k] = j;
      sX[k] = points[j];
      sx[k] = xn[j];
    }
    Pose hyp;
    if (!solve_dlt(sX, sx, hyp)) continue;
    const std::size_t c = count_inliers(hyp, points, pixels, K, thresh, nullptr);
    if (c > best_count) {
      best_count = c;
      best = hyp;
      const double eps = static_cast<double>(c) / static_cast<double>(n);
      const double p_good = std::pow(eps, kMinimalSample);
      if (p_good >= 1.0 - 1e-12) {
        needed = it + 1;
      } else if (p_good > 0.0) {
        // log1p: for a tiny consensus 1 - p_good rounds to 1 and log would give 0.
        const double k = std::log(1.0 - options.confidence) / std::log1p(-p_good);
        if (std::isfinite(k)) needed = static_cast<int>(std::min<double>(std::ceil(k), options.max_iterations));
      }
    }
  }

  PnpResult res;
  res.iterations = it;
  auto acceptable = [&](std::size_t c) {
    return c >= options.min_inliers && static_cast<double>(c) >= options.min_inlier_ratio * static_cast<double>(n);
  };
  if (!acceptable(best_count)) {
    throw PnpDegenerate("pnp_ransac: consensus of " + std::to_string(best_count) + " out of " + std::to_string(n));
  }

  // Refine on the consensus, then re-select inliers with the refined pose.
  Pose T = best;
  std::vector<std::uint8_t> mask;
  count_inliers(T, points, pixels, K, thresh, &mask);
  for (int round = 0; round < 3; ++round) {
    std::vector<std::uint8_t> before = mask;
    T = refine_reprojection(T, points, pixels, mask, K);
    count_inliers(T, points, pixels, K, thresh, &mask);
    if (mask == before) break;
  }
  res.pose = T;
  res.inliers = std::move(mask);
  res.inlier_count = static_cast<std::size_t>(std::count(res.inliers.begin(), res.inliers.end(), 1));
  if (!acceptable(res.inlier_count)) {
    throw PnpDegenerate("pnp_ransac: refined consensus of " + std::to_string(res.inlier_count) + " out of " +
                        std::to_string(n));
  }
  return res;
}

RelativePose estimate_relative_pose(const PointmapPair& pair, const CameraIntrinsics& K,
                                    const RelativePoseOptions& options) {
  if (pair.width != K.width || pair.height != K.height) {
    throw InvalidArgument("estimate_relative_pose: pair and intrinsics sizes differ");
  }
  struct Candidate {
    double key;
    std::size_t pixel;
  };
  std::vector<Candidate> cands;
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (std::size_t i = 0; i < pair.pixel_count(); ++i) {
    if (!pair.valid2[i] || !(pair.conf2[i] > 0.0f)) continue;
    // Weighted sampling without replacement: keep the largest u^(1/w).
    const double u = std::max(u01(rng), 1e-300);
    cands.push_back({std::log(u) / static_cast<double>(pair.conf2[i]), i});
  }
  if (cands.size() < static_cast<std::size_t>(kMinimalSample)) {
    throw DegenerateInput("estimate_relative_pose: " + std::to_string(cands.size()) + " usable correspondences");
  }
  if (cands.size() > options.max_correspondences) {
    std::nth_element(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(options.max_correspondences),
                     cands.end(), [](const Candidate& a, const Candidate& b) {
                       return a.key != b.key ? a.key > b.key : a.pixel < b.pixel;
                     });
    cands.resize(options.max_correspondences);
  }
  std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) { return a.pixel < b.pixel; });

  std::vector<Eigen::Vector3d> X;
  std::vector<Eigen::Vector2d> px;
  std::vector<double> w;
  for (const auto& c : cands) {
    X.push_back(pair.X2[c.pixel].cast<double>());
    px.emplace_back(static_cast<double>(c.pixel % pair.width), static_cast<double>(c.pixel / pair.width));
    w.push_back(pair.conf2[c.pixel]);
  }
  const PnpResult r = pnp_ransac(X, px, K, w, options.seed, options.pnp);
  RelativePose out;
  // PnP maps frame-a coordinates into camera b: exactly T_trans.
  out.T_trans = r.pose;
  out.correspondences = X.size();
  out.inliers = r.inlier_count;
  return out;
}

}  // namespace ogs
