#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "ogs/geometry.hpp"
#include "ogs/image.hpp"
#include "ogs/pointmap.hpp"
#include "ogs/rasterizer.hpp"
#include "ogs/scene.hpp"

namespace ogs {

struct Keyframe {
  int id = 0;         // position in keyframe order
  int frame_idx = 0;
  Pose pose;
  Image image;
  bool fixed = false;  // never moved by window optimization
  std::shared_ptr<const PointmapPair> pointmap_to_prev;
};

// ---- keyframes and the local window ----

/// Sorted indices of Gaussians whose footprint reaches the image with a peak
/// alpha of at least 1/255.
std::vector<std::uint32_t> visible_set(const GaussianMap& map, const Pose& T_cw, const CameraIntrinsics& K);

/// Intersection over union of two sorted index sets; 0 when both are empty.
double covisibility(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b);
double covisibility(const Keyframe& a, const Keyframe& b, const GaussianMap& map, const CameraIntrinsics& K);

/// Fraction of pixels whose accumulated alpha reaches 0.5.
double coverage(const RenderOutput& out, double min_alpha = 0.5);

struct KeyframePolicy {
  double min_covisibility = 0.90;
  double min_coverage = 0.5;
};

bool should_insert_keyframe(bool first_frame, double covis_with_last, double coverage,
                            const KeyframePolicy& policy = {});

struct LocalWindow {
  std::vector<int> keyframes;  // keyframe ids, oldest first
  std::size_t capacity = 8;
  double min_overlap = 0.3;
};

/// Appends new_kf, drops members overlapping it by less than min_overlap,
/// then drops the least-overlapping members while over capacity. The newest
/// keyframe is never evicted. Returns the evicted ids.
std::vector<int> update_window(LocalWindow& window, int new_kf, const std::function<double(int)>& overlap_with_new);

// ---- scale ----

struct ScaleState {
  double cumulative = 1.0;
  std::vector<double> history;
};

enum class ScaleRatioMode {
  cross_frame,  // segments from frame k-1/k to frame k/k+1, as in the ratio's definition
  within_frame  // segments between two frame-k points seen in both pairs
};

/// Pixels of the shared frame k valid in both pair (k-1, k) as X2 and pair (k, k+1) as X1.
std::vector<std::uint32_t> match_cross_pair(const PointmapPair& pair_prev, const PointmapPair& pair_curr);

/// Trimmed mean (20% off each end) of segment-length ratios, current pair over
/// previous pair. Throws InsufficientMatches below 2 usable samples.
double scale_ratio(const PointmapPair& pair_prev, const PointmapPair& pair_curr,
                   std::span<const std::uint32_t> matches, int n_samples = 2048, std::uint64_t seed = 0,
                   ScaleRatioMode mode = ScaleRatioMode::cross_frame);

inline constexpr double kMinStepRatio = 0.5;
inline constexpr double kMaxStepRatio = 2.0;

/// S_k = S_{k-1} * clamp(rho). Throws InvalidArgument for rho <= 0.
double update_cumulative_scale(ScaleState& state, double rho_bar);

// ---- insertion ----

struct SampledPoint {
  Eigen::Vector3d point;
  int x = 0;
  int y = 0;
};

enum class PointmapSide { first, second };

/// One highest-confidence valid point per cell x cell block; blocks whose depth
/// variance exceeds 4x the median block variance are re-split at cell / 2.
std::vector<SampledPoint> subsample_pointmap(const PointmapPair& pair, int cell = 4,
                                             PointmapSide side = PointmapSide::second);

struct InsertOptions {
  double explained_alpha = 0.9;
  double explained_depth_rel = 0.05;
  Eigen::Vector3d background = Eigen::Vector3d::Zero();
  int threads = 1;
};

struct KeyframeInsertion {
  std::size_t inserted = 0;
  std::size_t explained = 0;
};

/// Inserts points given in the pair's frame-a coordinates. Each point becomes
/// point_scale * pair_to_kf(p) in keyframe camera coordinates and is moved to
/// the world with T_kf^-1; its color is the image at its pixel. Points the map
/// already renders at the right depth are skipped.
KeyframeInsertion insert_at_keyframe(GaussianMap& map, std::span<const SampledPoint> samples, const Pose& pair_to_kf,
                                     double point_scale, const Pose& T_kf, const CameraIntrinsics& K,
                                     const Image& image, int kf_idx, const InsertOptions& options = {});

// ---- optimization ----

/// Mean over Gaussians of sum_a |s_a - mean(s)| with s the linear scales.
double isotropic_loss(const GaussianMap& map);
/// Adds weight * d(isotropic_loss)/d(log_scale) into map.grads().
void accumulate_isotropic_grad(GaussianMap& map, double weight);

struct LrSchedule {
  double n_iter = 0.0;
  double lr_init = 1.6e-2;
  double lr_final = 1.6e-4;
  double horizon = 10000.0;
  double lr_rot = 1e-3;
  double lr_scale = 5e-3;
  double lr_opacity = 5e-2;
  double lr_color = 2.5e-3;

  /// Learning rate of Gaussian means: log-linear decay, flat after the horizon.
  double mean_lr() const;
};

/// Factor on the cumulative iteration count for a keyframe-to-keyframe
/// rotation of theta degrees: 1 up to 2 degrees, 1 - sqrt(theta / 90) above,
/// 0 from 90 degrees on.
double iteration_factor(double theta_deg);

/// Applies iteration_factor to schedule.n_iter and returns the new value.
double adjust_iterations(LrSchedule& schedule, const Eigen::Matrix3d& R_prev_kf, const Eigen::Matrix3d& R_curr_kf);

struct WindowOptions {
  int iters = 60;
  double lambda_iso = 10.0;
  double step_rot = 3e-4;
  double step_trans = 1e-3;
  double momentum = 0.9;
  bool optimize_poses = true;
  Eigen::Vector3d background = Eigen::Vector3d::Zero();
  int threads = 1;
  int current_kf = 0;  // for pruning
  bool prune = true;
};

struct WindowResult {
  double initial_loss = 0.0;
  double final_loss = 0.0;
  std::size_t pruned = 0;
};

/// Joint descent on the Gaussians and the non-fixed window poses for the
/// summed photometric loss plus lambda_iso * isotropic_loss. Keeps the best
/// iterate, advances schedule.n_iter by iters and prunes at the end.
WindowResult optimize_window(GaussianMap& map, std::span<Keyframe* const> window, const CameraIntrinsics& K,
                             LrSchedule& schedule, const WindowOptions& options = {});

/// Summed photometric loss plus regularizer at the current parameters.
double window_objective(const GaussianMap& map, std::span<Keyframe* const> window, const CameraIntrinsics& K,
                        double lambda_iso, const Eigen::Vector3d& background, int threads = 1);

}  // namespace ogs
