#pragma once

#include "ogs/dataset.hpp"
#include "ogs/image.hpp"

namespace ogs {

enum class AlignMode { se3, sim3 };

/// RMSE of camera-center residuals after least-squares alignment of the
/// estimate onto the ground truth over frames present in both.
double ate_rmse(const Trajectory& est, const Trajectory& gt, AlignMode mode = AlignMode::sim3);

/// Re-indexes est by matching its timestamps to gt's (within tol).
Trajectory associate_by_timestamp(const Trajectory& est, const Trajectory& gt, double tol = 1e-4);

inline constexpr double kPsnrCap = 99.0;

double psnr(const Image& a, const Image& b);
/// Gaussian-window SSIM (11x11, sigma 1.5), averaged over channels.
double ssim(const Image& a, const Image& b);

}  // namespace ogs
