#include <cmath>
#include <deque>
#include <limits>

#include "ogs/errors.hpp"
#include "ogs/tracking.hpp"

namespace ogs {

const char* to_string(TrackStatus s) {
  switch (s) {
    case TrackStatus::ok: return "ok";
    case TrackStatus::pnp_degenerate: return "pnp_degenerate";
    case TrackStatus::diverged: return "diverged";
  }
  return "?";
}

Pose PoseStepper::step(const Pose& T, const Twist& grad_camera, const Eigen::Vector3d& pivot) {
  // Re-express the increment as a rotation about the pivot plus a
  // translation: nu_camera = nu + pivot x omega.
  Twist grad = grad_camera;
  grad.omega -= pivot.cross(grad_camera.nu);
  ++t_;
  ++t_m_;
  m_.omega = momentum_ * m_.omega + (1.0 - momentum_) * grad.omega;
  m_.nu = momentum_ * m_.nu + (1.0 - momentum_) * grad.nu;
  v_rot_ = kSecondMoment * v_rot_ + (1.0 - kSecondMoment) * grad.omega.squaredNorm();
  v_trans_ = kSecondMoment * v_trans_ + (1.0 - kSecondMoment) * grad.nu.squaredNorm();
  // Bias-corrected moments; the step is step_rot (resp. step_trans) long while
  // successive gradients agree and shrinks when they start to cancel.
  const double c1 = 1.0 - std::pow(momentum_, t_m_);
  const double c2 = 1.0 - std::pow(kSecondMoment, t_);
  Twist d;
  if (v_rot_ > 0.0) d.omega = -step_rot_ * (m_.omega / c1) / std::sqrt(v_rot_ / c2);
  if (v_trans_ > 0.0) d.nu = -step_trans_ * (m_.nu / c1) / std::sqrt(v_trans_ / c2);
  d.nu += pivot.cross(d.omega);
  return se3_exp(d) * T;
}

double mean_depth(const RenderOutput& out, double min_alpha) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t p = 0; p < out.alpha.pixel_count(); ++p) {
    const double a = out.alpha.data[p];
    if (a < min_alpha) continue;
    sum += out.depth.data[p] / a;
    ++n;
  }
  return n > 0 ? sum / static_cast<double>(n) : 0.0;
}

TrackResult refine_pose(const GaussianMap& map, const Image& image, const Pose& T_init, const CameraIntrinsics& K,
                        const RefineOptions& options) {
  if (options.max_iters < 1) throw InvalidArgument("refine_pose: max_iters must be >= 1");
  TrackResult res;
  res.pose = T_init;
  if (map.empty()) {
    res.status = TrackStatus::diverged;
    return res;
  }
  const RenderOptions ropt{options.background, options.threads};
  PoseStepper stepper(options.step_rot, options.step_trans, options.momentum);
  Pose T = T_init;
  Eigen::Vector3d pivot = Eigen::Vector3d::Zero();
  double best = std::numeric_limits<double>::infinity();
  double previous = best;
  std::deque<double> history;  // best loss after each iteration
  int it = 0;
  for (; it < options.max_iters; ++it) {
    const RenderOutput out = render(map, T, K, ropt);
    const PhotometricGrad lg = photometric_loss_grad(out, image, options.min_alpha);
    if (lg.active_pixels == 0) {
      if (it == 0) {
        res.status = TrackStatus::diverged;
        return res;
      }
      break;  // stepped off the map; keep the best pose so far
    }
    if (it == 0) res.initial_loss = lg.loss;
    if (lg.loss < best) {
      best = lg.loss;
      res.pose = T;
    }
    if (best == 0.0) {
      ++it;
      break;
    }
    history.push_back(best);
    if (static_cast<int>(history.size()) > options.patience) {
      const double old = history.front();
      history.pop_front();
      if (old - best < options.rel_tol * old) {
        ++it;
        break;
      }
    }
    if (it == 0) pivot = Eigen::Vector3d(0.0, 0.0, mean_depth(out));
    // Momentum carried us past the valley floor: start again from the gradient.
    if (lg.loss > previous) stepper.reset_momentum();
    previous = lg.loss;
    T = stepper.step(T, backward(out, lg.dL_dcolor, nullptr, options.threads), pivot);
  }
  res.refine_iters_used = it;
  res.final_loss = best;
  res.status = res.pose.rotation.allFinite() && res.pose.translation.allFinite() ? TrackStatus::ok
                                                                                   : TrackStatus::diverged;
  return res;
}

}  // namespace ogs
