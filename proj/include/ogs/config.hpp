#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ogs/mapping.hpp"

namespace ogs {

enum class ProviderKind { files, synthetic };

/// Every tunable of a SLAM run. Defaults are the engine defaults.
struct SlamConfig {
  // keyframes and window
  std::size_t window_capacity = 8;
  double window_min_overlap = 0.3;
  double kf_min_covisibility = 0.90;
  double kf_min_coverage = 0.5;

  // tracking
  int track_iters = 100;
  double track_step_rot = 3e-4;
  double track_step_trans = 1e-3;
  double track_momentum = 0.9;
  double track_min_alpha = 0.1;
  double track_rel_tol = 1e-5;
  int track_patience = 10;
  double pnp_inlier_px = 2.0;
  int pnp_max_iters = 500;
  std::size_t pnp_max_points = 4096;

  // mapping
  int map_iters = 60;
  double lambda_iso = 10.0;
  double lr_mean_init = 1.6e-2;
  double lr_mean_final = 1.6e-4;
  double lr_horizon = 10000.0;
  double lr_rot = 1e-3;
  double lr_scale = 5e-3;
  double lr_opacity = 5e-2;
  double lr_color = 2.5e-3;
  bool lr_adjustment = true;
  int subsample_cell = 4;
  double explained_alpha = 0.9;
  double explained_depth_rel = 0.05;

  // scale mapper
  int scale_samples = 2048;
  ScaleRatioMode scale_ratio_mode = ScaleRatioMode::cross_frame;

  // run
  ProviderKind provider = ProviderKind::files;
  Eigen::Vector3d background = Eigen::Vector3d::Zero();
  std::uint64_t seed = 0;
  int threads = 1;

  void validate() const;
};

/// Parses `key = value` lines; '#' starts a comment. Unknown keys and bad
/// values throw InvalidArgument naming the line.
SlamConfig parse_config(const std::string& text);
SlamConfig load_config(const std::filesystem::path& path);
std::string format_config(const SlamConfig& config);
std::vector<std::string> config_keys();

}  // namespace ogs
