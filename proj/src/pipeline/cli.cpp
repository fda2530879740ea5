#include <CLI11.hpp>

#include <algorithm>
#include <iomanip>
#include <ostream>

#include "ogs/cli.hpp"
#include "ogs/config.hpp"
#include "ogs/errors.hpp"
#include "ogs/metrics.hpp"
#include "ogs/slam.hpp"
#include "ogs/synth.hpp"

namespace ogs::cli {

namespace {

int cmd_run(const std::string& input, const std::string& config_path, const std::string& out_dir,
            const std::string& provider_name, int max_frames, bool verbose, std::ostream& out, std::ostream& err) {
  SlamConfig config = config_path.empty() ? SlamConfig{} : load_config(config_path);
  if (provider_name == "files") config.provider = ProviderKind::files;
  else if (provider_name == "synthetic") config.provider = ProviderKind::synthetic;
  SequenceDataset ds = open_dataset(input);

  std::unique_ptr<PointmapProvider> provider;
  if (config.provider == ProviderKind::synthetic) provider = open_synthetic_provider(ds);
  else provider = std::make_unique<FilePointmapProvider>(ds.pointmap_dir(), ds.K.width, ds.K.height);

  if (max_frames > 0 && max_frames < ds.n_frames) {
    ds.n_frames = max_frames;
    ds.timestamps.resize(static_cast<std::size_t>(max_frames));
    if (ds.groundtruth) ds.groundtruth->resize(static_cast<std::size_t>(max_frames));
  }

  std::function<void(const FrameLog&)> progress;
  if (verbose) {
    progress = [&err](const FrameLog& l) {
      err << "frame " << l.frame << (l.keyframe ? " kf" : "   ") << " loss " << l.track_loss_init << " -> "
          << l.track_loss_final << " iters " << l.refine_iters << " S " << l.scale << " theta " << l.theta_deg
          << " gaussians " << l.gaussians << '\n';
    };
  }
  const SlamResult r = run_slam(ds, config, *provider, progress);
  std::filesystem::create_directories(out_dir);
  const std::filesystem::path o(out_dir);
  write_tum(o / "trajectory.txt", r.trajectory);
  save_map(r.map, o / "map.ogsm");
  write_log_csv(o / "log.csv", r.log);
  write_keyframes(o / "keyframes.txt", r.keyframes);

  const auto fallbacks = std::count_if(r.log.begin(), r.log.end(), [](const FrameLog& l) {
    return l.provider_failed || l.status != TrackStatus::ok;
  });
  out << "frames " << r.trajectory.size() << "\nkeyframes " << r.keyframes.size() << "\ngaussians " << r.map.size()
      << "\nfallback_frames " << fallbacks << '\n';
  if (ds.groundtruth) {
    out << "ate_rmse_sim3 " << ate_rmse(r.trajectory, *ds.groundtruth, AlignMode::sim3) << "\ntrajectory_length "
        << trajectory_length(*ds.groundtruth) << '\n';
  }
  return 0;
}

int cmd_eval(const std::string& est_path, const std::string& gt_path, const std::string& mode, std::ostream& out) {
  const Trajectory gt = read_tum(gt_path);
  const Trajectory est = associate_by_timestamp(read_tum(est_path), gt);
  const double ate = ate_rmse(est, gt, mode == "se3" ? AlignMode::se3 : AlignMode::sim3);
  const double len = trajectory_length(gt);
  out << std::setprecision(9) << "ate_rmse " << ate << "\ntrajectory_length " << len << "\nate_percent_of_length "
      << 100.0 * ate / len << '\n';
  return 0;
}

int cmd_nvs(const std::string& map_path, const std::string& input, const std::string& traj_path, int every,
            std::ostream& out) {
  const SequenceDataset ds = open_dataset(input);
  const GaussianMap map = load_map(map_path);
  const Trajectory traj = read_tum(traj_path);
  std::set<int> keyframes;
  const auto kf_path = std::filesystem::path(traj_path).parent_path() / "keyframes.txt";
  if (std::filesystem::exists(kf_path))
    for (int k : read_keyframes(kf_path)) keyframes.insert(k);
  std::set<int> holdout;
  for (int i = 0; i < ds.n_frames; i += every)
    if (!keyframes.count(i)) holdout.insert(i);
  const NvsScore s = evaluate_nvs(map, traj, ds, holdout, keyframes);
  out << std::setprecision(6) << "psnr " << s.psnr << "\nssim " << s.ssim << "\nframes " << s.frames << '\n';
  return 0;
}

int cmd_render(const std::string& map_path, const std::string& pose, const std::string& intrinsics,
               const std::string& out_png) {
  const GaussianMap map = load_map(map_path);
  const RenderOutput r = render(map, parse_tum_pose(pose), read_intrinsics(intrinsics), {Eigen::Vector3d::Zero(), 0});
  write_png(out_png, r.color);
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Monocular Gaussian-splatting SLAM", "ogslam"};
  app.require_subcommand(1);

  std::string input, config_path, out_dir, provider;
  auto* run = app.add_subcommand("run", "track and map a sequence");
  run->add_option("--input", input, "sequence directory")->required();
  run->add_option("--config", config_path, "key = value config file");
  run->add_option("--out", out_dir, "output directory")->required();
  run->add_option("--provider", provider, "pointmap provider")->check(CLI::IsMember({"files", "synthetic"}));
  int max_frames = 0;
  run->add_option("--frames", max_frames, "process only the first N frames")->check(CLI::Range(2, 1 << 30));
  bool verbose = false;
  run->add_flag("-v,--verbose", verbose, "per-frame progress on stderr");

  SynthOptions so;
  std::string kind = "turn";
  auto* synth = app.add_subcommand("synth", "generate a synthetic sequence");
  synth->add_option("--frames", so.n_frames)->check(CLI::Range(2, 100000));
  synth->add_option("--kind", kind)->check(CLI::IsMember({"straight", "turn", "slope"}));
  synth->add_option("--points", so.n_points);
  synth->add_option("--noise", so.noise_sigma)->check(CLI::NonNegativeNumber);
  synth->add_option("--seed", so.seed);
  synth->add_option("--out", out_dir)->required();

  std::string est, gt, mode = "sim3";
  auto* eval = app.add_subcommand("eval", "ATE RMSE of a trajectory against ground truth");
  eval->add_option("--est", est)->required();
  eval->add_option("--gt", gt)->required();
  eval->add_option("--mode", mode)->check(CLI::IsMember({"se3", "sim3"}));

  std::string map_path, traj;
  int every = 5;
  auto* nvs = app.add_subcommand("nvs", "PSNR/SSIM on non-keyframe views");
  nvs->add_option("--map", map_path)->required();
  nvs->add_option("--input", input)->required();
  nvs->add_option("--traj", traj)->required();
  nvs->add_option("--holdout-every", every)->check(CLI::PositiveNumber);

  std::string pose, intrinsics, png;
  auto* rend = app.add_subcommand("render", "render a map from a pose");
  rend->add_option("--map", map_path)->required();
  rend->add_option("--pose", pose, "tx ty tz qx qy qz qw (camera to world)")->required();
  rend->add_option("--intrinsics", intrinsics)->required();
  rend->add_option("--out", png)->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*run) return cmd_run(input, config_path, out_dir, provider, max_frames, verbose, out, err);
    if (*synth) {
      so.kind = parse_trajectory_kind(kind);
      const SequenceDataset ds = synth_dataset(so, out_dir);
      out << "frames " << ds.n_frames << "\ntrajectory_length " << trajectory_length(*ds.groundtruth) << '\n';
      return 0;
    }
    if (*eval) return cmd_eval(est, gt, mode, out);
    if (*nvs) return cmd_nvs(map_path, input, traj, every, out);
    if (*rend) return cmd_render(map_path, pose, intrinsics, png);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace ogs::cli
