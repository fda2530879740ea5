#include <algorithm>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>

#include "ogs/errors.hpp"
#include "ogs/mapping.hpp"
#include "ogs/metrics.hpp"
#include "ogs/slam.hpp"

namespace ogs {

namespace {

RefineOptions refine_options(const SlamConfig& c) {
  RefineOptions o;
  o.max_iters = c.track_iters;
  o.step_rot = c.track_step_rot;
  o.step_trans = c.track_step_trans;
  o.momentum = c.track_momentum;
  o.min_alpha = c.track_min_alpha;
  o.rel_tol = c.track_rel_tol;
  o.patience = c.track_patience;
  o.background = c.background;
  o.threads = c.threads;
  return o;
}

RelativePoseOptions relative_pose_options(const SlamConfig& c, int frame) {
  RelativePoseOptions o;
  o.max_correspondences = c.pnp_max_points;
  o.seed = c.seed + static_cast<std::uint64_t>(frame);
  o.pnp.inlier_px = c.pnp_inlier_px;
  o.pnp.max_iterations = c.pnp_max_iters;
  return o;
}

LrSchedule lr_schedule(const SlamConfig& c) {
  LrSchedule s;
  s.lr_init = c.lr_mean_init;
  s.lr_final = c.lr_mean_final;
  s.horizon = c.lr_horizon;
  s.lr_rot = c.lr_rot;
  s.lr_scale = c.lr_scale;
  s.lr_opacity = c.lr_opacity;
  s.lr_color = c.lr_color;
  return s;
}

WindowOptions window_options(const SlamConfig& c) {
  WindowOptions o;
  o.iters = c.map_iters;
  o.lambda_iso = c.lambda_iso;
  o.step_rot = c.track_step_rot;
  o.step_trans = c.track_step_trans;
  o.momentum = c.track_momentum;
  o.background = c.background;
  o.threads = c.threads;
  return o;
}

}  // namespace

SlamResult run_slam(const SequenceDataset& dataset, const SlamConfig& config, PointmapProvider& provider,
                    const std::function<void(const FrameLog&)>& on_frame) {
  config.validate();
  if (dataset.n_frames < 2) throw InvalidArgument("run_slam: need at least 2 frames");
  const CameraIntrinsics& K = dataset.K;
  const RefineOptions refine_opts = refine_options(config);
  const KeyframePolicy policy{config.kf_min_covisibility, config.kf_min_coverage};
  InsertOptions insert_opts{config.explained_alpha, config.explained_depth_rel, config.background, config.threads};
  WindowOptions window_opts = window_options(config);
  LrSchedule schedule = lr_schedule(config);
  LocalWindow window{{}, config.window_capacity, config.window_min_overlap};
  ScaleState scale;

  SlamResult result;
  GaussianMap& map = result.map;
  std::vector<std::unique_ptr<Keyframe>> keyframes;

  // Every frame's pose is kept relative to the keyframe it was tracked
  // against, so later window adjustments of that keyframe carry over.
  std::vector<int> ref_kf(dataset.n_frames, 0);
  std::vector<Pose> rel_to_ref(dataset.n_frames);
  std::vector<Pose> poses(dataset.n_frames);

  auto regress = [&](int a, int b, const Image& ia, const Image& ib) -> std::shared_ptr<const PointmapPair> {
    try {
      return std::make_shared<const PointmapPair>(
          regress_pair(provider, ia, ib, static_cast<std::uint64_t>(a), static_cast<std::uint64_t>(b)));
    } catch (const ProviderError&) {
      return nullptr;
    }
  };

  auto optimize = [&](int current) {
    std::vector<Keyframe*> members;
    for (int id : window.keyframes) {
      Keyframe* kf = keyframes[static_cast<std::size_t>(id)].get();
      // Gauge: the first keyframe, and the oldest window member, stay put.
      kf->fixed = id == 0 || id == window.keyframes.front();
      members.push_back(kf);
    }
    window_opts.current_kf = current;
    if (window_opts.iters == 0) return WindowResult{};  // insertion-only map
    return optimize_window(map, members, K, schedule, window_opts);
  };

  // Frame 0 bootstraps the map from its own points in pair (0, 1).
  Image image_prev = dataset.load_frame(0);
  Image image_curr = dataset.load_frame(1);
  std::shared_ptr<const PointmapPair> pair_curr = regress(0, 1, image_prev, image_curr);
  if (!pair_curr) throw ProviderError("bootstrap pair unavailable", 0, 1);
  {
    auto kf = std::make_unique<Keyframe>();
    kf->id = 0;
    kf->frame_idx = 0;
    kf->image = image_prev;
    kf->fixed = true;
    kf->pointmap_to_prev = pair_curr;
    const auto samples = subsample_pointmap(*pair_curr, config.subsample_cell, PointmapSide::first);
    const KeyframeInsertion ins = insert_at_keyframe(map, samples, Pose::identity(), 1.0, Pose::identity(), K,
                                                     image_prev, 0, insert_opts);
    keyframes.push_back(std::move(kf));
    update_window(window, 0, [](int) { return 1.0; });
    const WindowResult wr = optimize(0);
    result.keyframes.push_back(0);

    FrameLog log;
    log.frame = 0;
    log.keyframe = true;
    log.n_iter = schedule.n_iter;
    log.window_size = window.keyframes.size();
    log.gaussians = map.size();
    log.inserted = ins.inserted;
    log.map_loss = wr.final_loss;
    result.log.push_back(log);
    if (on_frame) on_frame(log);
  }

  std::shared_ptr<const PointmapPair> pair_prev;
  Pose velocity;  // last frame-to-frame motion, map scale
  int last_kf = 0;

  for (int k = 1; k < dataset.n_frames; ++k) {
    FrameLog log;
    log.frame = k;
    if (k > 1) {
      image_prev = std::move(image_curr);
      image_curr = dataset.load_frame(k);
      pair_prev = std::move(pair_curr);
      pair_curr = regress(k - 1, k, image_prev, image_curr);
    }
    log.provider_failed = !pair_curr;

    // Scale of this pair relative to the first one.
    log.rho = 1.0;
    if (pair_prev && pair_curr) {
      try {
        const auto matches = match_cross_pair(*pair_prev, *pair_curr);
        log.rho = scale_ratio(*pair_prev, *pair_curr, matches, config.scale_samples,
                              config.seed + static_cast<std::uint64_t>(k), config.scale_ratio_mode);
        update_cumulative_scale(scale, log.rho);
        log.rho = scale.history.back();
      } catch (const InsufficientMatches&) {
        log.rho = 1.0;
      }
    }
    const double S = scale.cumulative;
    log.scale = S;

    // Motion prior: PnP on the pair, else constant velocity.
    Pose motion = velocity;
    bool have_pnp = false;
    if (pair_curr) {
      try {
        const RelativePose rel = estimate_relative_pose(*pair_curr, K, relative_pose_options(config, k));
        motion = rel.T_trans;
        motion.translation /= S;
        log.inliers = rel.inliers;
        have_pnp = true;
      } catch (const DegenerateInput&) {
      } catch (const PnpDegenerate&) {
      }
    }
    const Pose T_prev = poses[k - 1];
    const TrackResult track = refine_pose(map, image_curr, chain_pose(T_prev, motion), K, refine_opts);
    log.status = have_pnp ? track.status : (track.status == TrackStatus::ok ? TrackStatus::pnp_degenerate : track.status);
    log.refine_iters = track.refine_iters_used;
    log.track_loss_init = track.initial_loss;
    log.track_loss_final = track.final_loss;
    Pose pose = track.pose;
    velocity = pose * T_prev.inverse();

    const Keyframe& last = *keyframes[static_cast<std::size_t>(last_kf)];
    const RenderOutput view = render(map, pose, K, {config.background, config.threads});
    const double covis = covisibility(visible_set(map, pose, K), visible_set(map, last.pose, K));
    const bool is_kf = pair_curr && should_insert_keyframe(false, covis, coverage(view), policy);

    if (is_kf) {
      const int id = static_cast<int>(keyframes.size());
      log.theta_deg = rotation_angle_deg(last.pose.rotation, pose.rotation);
      if (config.lr_adjustment) adjust_iterations(schedule, last.pose.rotation, pose.rotation);

      // Frame-k points of the pair, in frame k-1 coordinates at pair scale,
      // moved into camera k with the tracked motion.
      Pose pair_to_kf = pose * T_prev.inverse();
      pair_to_kf.translation *= S;
      const auto samples = subsample_pointmap(*pair_curr, config.subsample_cell, PointmapSide::second);
      const KeyframeInsertion ins =
          insert_at_keyframe(map, samples, pair_to_kf, 1.0 / S, pose, K, image_curr, id, insert_opts);
      log.inserted = ins.inserted;

      auto kf = std::make_unique<Keyframe>();
      kf->id = id;
      kf->frame_idx = k;
      kf->pose = pose;
      kf->image = image_curr;
      kf->pointmap_to_prev = pair_curr;
      keyframes.push_back(std::move(kf));
      update_window(window, id, [&](int other) {
        return covisibility(*keyframes[static_cast<std::size_t>(other)], *keyframes.back(), map, K);
      });
      const WindowResult wr = optimize(id);
      log.map_loss = wr.final_loss;
      pose = keyframes.back()->pose;
      last_kf = id;
      log.keyframe = true;
      result.keyframes.push_back(k);
    }

    ref_kf[k] = last_kf;
    rel_to_ref[k] = pose * keyframes[static_cast<std::size_t>(last_kf)]->pose.inverse();
    poses[k] = pose;
    log.n_iter = schedule.n_iter;
    log.window_size = window.keyframes.size();
    log.gaussians = map.size();
    result.log.push_back(log);
    if (on_frame) on_frame(log);
  }

  for (int k = 0; k < dataset.n_frames; ++k) {
    const Pose T = rel_to_ref[k] * keyframes[static_cast<std::size_t>(ref_kf[k])]->pose;
    result.trajectory.push_back({k, dataset.timestamps[static_cast<std::size_t>(k)], T});
  }
  return result;
}

void write_log_csv(const std::filesystem::path& path, const std::vector<FrameLog>& log) {
  std::ofstream f(path);
  if (!f) throw InvalidArgument("cannot write " + path.string());
  f << "frame,keyframe,status,provider_failed,inliers,refine_iters,track_loss_init,track_loss_final,rho,scale,"
       "theta_deg,n_iter,window_size,gaussians,inserted,map_loss\n";
  f << std::setprecision(9);
  for (const auto& e : log) {
    f << e.frame << ',' << e.keyframe << ',' << to_string(e.status) << ',' << e.provider_failed << ',' << e.inliers
      << ',' << e.refine_iters << ',' << e.track_loss_init << ',' << e.track_loss_final << ',' << e.rho << ','
      << e.scale << ',' << e.theta_deg << ',' << e.n_iter << ',' << e.window_size << ',' << e.gaussians << ','
      << e.inserted << ',' << e.map_loss << '\n';
  }
}

void write_keyframes(const std::filesystem::path& path, const std::vector<int>& keyframes) {
  std::ofstream f(path);
  if (!f) throw InvalidArgument("cannot write " + path.string());
  for (int k : keyframes) f << k << '\n';
}

std::vector<int> read_keyframes(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw InvalidArgument("cannot read " + path.string());
  std::vector<int> out;
  int k;
  while (f >> k) out.push_back(k);
  if (!f.eof()) throw InvalidArgument(path.string() + ": expected one frame index per line");
  return out;
}

NvsScore evaluate_nvs(const GaussianMap& map, const Trajectory& poses, const SequenceDataset& dataset,
                      const std::set<int>& holdout, const std::set<int>& keyframes, const Eigen::Vector3d& background,
                      int threads) {
  if (holdout.empty()) throw InvalidArgument("evaluate_nvs: empty holdout set");
  for (int h : holdout) {
    if (keyframes.count(h)) throw InvalidArgument("evaluate_nvs: holdout frame " + std::to_string(h) + " is a keyframe");
  }
  std::map<int, Pose> by_frame;
  for (const auto& e : poses) by_frame[e.frame_idx] = e.T_cw;
  NvsScore score;
  for (int h : holdout) {
    const auto it = by_frame.find(h);
    if (it == by_frame.end()) throw InvalidArgument("evaluate_nvs: no pose for frame " + std::to_string(h));
    const Image target = dataset.load_frame(h);
    const RenderOutput out = render(map, it->second, dataset.K, {background, threads});
    score.psnr += psnr(out.color, target);
    score.ssim += ssim(out.color, target);
    ++score.frames;
  }
  score.psnr /= static_cast<double>(score.frames);
  score.ssim /= static_cast<double>(score.frames);
  return score;
}

}  // namespace ogs
