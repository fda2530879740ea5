#include <algorithm>
#include <cmath>
#include <limits>

#include "ogs/errors.hpp"
#include "ogs/mapping.hpp"
#include "ogs/tracking.hpp"

namespace ogs {

double isotropic_loss(const GaussianMap& map) {
  if (map.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& g : map.gaussians()) {
    const Eigen::Vector3d s = g.scale();
    sum += (s.array() - s.mean()).abs().sum();
  }
  return sum / static_cast<double>(map.size());
}

void accumulate_isotropic_grad(GaussianMap& map, double weight) {
  if (map.empty() || weight == 0.0) return;
  const double w = weight / static_cast<double>(map.size());
  auto& grads = map.grads();
  for (std::size_t i = 0; i < map.size(); ++i) {
    const Eigen::Vector3d s = map[i].scale();
    const double m = s.mean();
    Eigen::Vector3d sign;
    for (int a = 0; a < 3; ++a) sign[a] = s[a] > m ? 1.0 : (s[a] < m ? -1.0 : 0.0);
    // d/ds_b sum_a |s_a - m| = sign_b - mean(sign); chain through s = exp(log s).
    const Eigen::Vector3d d_s = sign.array() - sign.mean();
    grads[i].log_scale += w * d_s.cwiseProduct(s);
  }
}

double LrSchedule::mean_lr() const {
  const double t = std::clamp(n_iter / horizon, 0.0, 1.0);
  return std::exp((1.0 - t) * std::log(lr_init) + t * std::log(lr_final));
}

double iteration_factor(double theta_deg) {
  if (!(theta_deg > 2.0)) return 1.0;
  if (theta_deg >= 90.0) return 0.0;
  return 1.0 - std::sqrt(theta_deg / 90.0);
}

double adjust_iterations(LrSchedule& schedule, const Eigen::Matrix3d& R_prev_kf, const Eigen::Matrix3d& R_curr_kf) {
  const double theta = rotation_angle_deg(R_prev_kf, R_curr_kf);
  schedule.n_iter = std::max(0.0, schedule.n_iter * iteration_factor(theta));
  return schedule.n_iter;
}

namespace {

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamEps = 1e-15;

void adam_update(GaussianMap& map, const LrSchedule& schedule) {
  auto& grads = map.grads();
  auto& m1 = map.first_moments();
  auto& m2 = map.second_moments();
  auto& steps = map.adam_steps();
  auto& gs = map.mutable_gaussians();
  const double lr_mean = schedule.mean_lr();
  for (std::size_t i = 0; i < gs.size(); ++i) {
    const GaussianParams& g = grads[i];
    // Gaussians no view touched keep their parameters and moments.
    if (g.mean.isZero(0.0) && g.rot.isZero(0.0) && g.log_scale.isZero(0.0) && g.opacity_logit == 0.0 &&
        g.color.isZero(0.0)) {
      continue;
    }
    const std::uint32_t t = ++steps[i];
    const double c1 = 1.0 - std::pow(kBeta1, t);
    const double c2 = 1.0 - std::pow(kBeta2, t);
    auto step = [&](auto& param, const auto& grad, auto& mom1, auto& mom2, double lr) {
      mom1 = kBeta1 * mom1 + (1.0 - kBeta1) * grad;
      mom2 = kBeta2 * mom2 + (1.0 - kBeta2) * grad.cwiseProduct(grad);
      param -= (lr * (mom1 / c1).array() / ((mom2 / c2).array().sqrt() + kAdamEps)).matrix();
    };
    step(gs[i].mean, g.mean, m1[i].mean, m2[i].mean, lr_mean);
    step(gs[i].rot, g.rot, m1[i].rot, m2[i].rot, schedule.lr_rot);
    step(gs[i].log_scale, g.log_scale, m1[i].log_scale, m2[i].log_scale, schedule.lr_scale);
    step(gs[i].color, g.color, m1[i].color, m2[i].color, schedule.lr_color);
    m1[i].opacity_logit = kBeta1 * m1[i].opacity_logit + (1.0 - kBeta1) * g.opacity_logit;
    m2[i].opacity_logit = kBeta2 * m2[i].opacity_logit + (1.0 - kBeta2) * g.opacity_logit * g.opacity_logit;
    gs[i].opacity_logit -=
        schedule.lr_opacity * (m1[i].opacity_logit / c1) / (std::sqrt(m2[i].opacity_logit / c2) + kAdamEps);
    const double qn = gs[i].rot.norm();
    if (qn > 0.0) gs[i].rot /= qn;
  }
}

}  // namespace

double window_objective(const GaussianMap& map, std::span<Keyframe* const> window, const CameraIntrinsics& K,
                        double lambda_iso, const Eigen::Vector3d& background, int threads) {
  double loss = lambda_iso * isotropic_loss(map);
  for (const Keyframe* kf : window) loss += photometric_loss(render(map, kf->pose, K, {background, threads}), kf->image);
  return loss;
}

WindowResult optimize_window(GaussianMap& map, std::span<Keyframe* const> window, const CameraIntrinsics& K,
                             LrSchedule& schedule, const WindowOptions& options) {
  if (window.empty()) throw InvalidArgument("optimize_window: empty window");
  if (options.iters < 1) throw InvalidArgument("optimize_window: iters must be >= 1");
  WindowResult res;
  const RenderOptions ropt{options.background, options.threads};

  std::vector<PoseStepper> steppers(window.size(), PoseStepper(options.step_rot, options.step_trans, options.momentum));
  double best = std::numeric_limits<double>::infinity();
  std::vector<Gaussian3D> best_gaussians;
  std::vector<Pose> best_poses(window.size());

  auto remember = [&](double loss) {
    if (!(loss < best)) return;
    best = loss;
    best_gaussians = map.gaussians();
    for (std::size_t k = 0; k < window.size(); ++k) best_poses[k] = window[k]->pose;
  };

  for (int it = 0; it <= options.iters; ++it) {
    const bool evaluate_only = it == options.iters;
    map.zero_grad();
    double loss = options.lambda_iso * isotropic_loss(map);
    std::vector<Twist> pose_grads(window.size());
    for (std::size_t k = 0; k < window.size(); ++k) {
      const RenderOutput out = render(map, window[k]->pose, K, ropt);
      const PhotometricGrad lg = photometric_loss_grad(out, window[k]->image);
      loss += lg.loss;
      if (!evaluate_only) pose_grads[k] = backward(out, lg.dL_dcolor, &map, options.threads);
    }
    if (it == 0) res.initial_loss = loss;
    remember(loss);
    if (evaluate_only) break;

    accumulate_isotropic_grad(map, options.lambda_iso);
    adam_update(map, schedule);
    if (options.optimize_poses) {
      for (std::size_t k = 0; k < window.size(); ++k) {
        if (!window[k]->fixed) window[k]->pose = steppers[k].step(window[k]->pose, pose_grads[k]);
      }
    }
  }

  // Return to the best iterate seen.
  map.mutable_gaussians() = best_gaussians;
  for (std::size_t k = 0; k < window.size(); ++k) window[k]->pose = best_poses[k];
  res.final_loss = best;
  schedule.n_iter += options.iters;
  map.drop_non_finite();
  if (options.prune) res.pruned = map.prune(options.current_kf);
  return res;
}

}  // namespace ogs
