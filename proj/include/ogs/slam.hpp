#pragma once

#include <filesystem>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "ogs/config.hpp"
#include "ogs/dataset.hpp"
#include "ogs/pointmap.hpp"
#include "ogs/scene.hpp"
#include "ogs/tracking.hpp"

namespace ogs {

struct FrameLog {
  int frame = 0;
  bool keyframe = false;
  TrackStatus status = TrackStatus::ok;
  bool provider_failed = false;
  std::size_t inliers = 0;
  int refine_iters = 0;
  double track_loss_init = 0.0;
  double track_loss_final = 0.0;
  double rho = 1.0;  // step ratio applied this frame (1 when held)
  double scale = 1.0;
  double theta_deg = 0.0;
  double n_iter = 0.0;
  std::size_t window_size = 0;
  std::size_t gaussians = 0;
  std::size_t inserted = 0;
  double map_loss = 0.0;
};

struct SlamResult {
  Trajectory trajectory;
  GaussianMap map;
  std::vector<FrameLog> log;
  std::vector<int> keyframes;  // frame indices
};

/// on_frame, if set, sees each frame's log entry as soon as it is final.
SlamResult run_slam(const SequenceDataset& dataset, const SlamConfig& config, PointmapProvider& provider,
                    const std::function<void(const FrameLog&)>& on_frame = {});

/// log.csv with a header row; see FrameLog for the columns.
void write_log_csv(const std::filesystem::path& path, const std::vector<FrameLog>& log);
void write_keyframes(const std::filesystem::path& path, const std::vector<int>& keyframes);
std::vector<int> read_keyframes(const std::filesystem::path& path);

struct NvsScore {
  double psnr = 0.0;
  double ssim = 0.0;
  std::size_t frames = 0;
};

/// Renders each holdout frame at its estimated pose and compares with the
/// dataset image. Throws InvalidArgument if the holdout is empty or overlaps
/// the keyframes.
NvsScore evaluate_nvs(const GaussianMap& map, const Trajectory& poses, const SequenceDataset& dataset,
                      const std::set<int>& holdout, const std::set<int>& keyframes,
                      const Eigen::Vector3d& background = Eigen::Vector3d::Zero(), int threads = 1);

}  // namespace ogs
