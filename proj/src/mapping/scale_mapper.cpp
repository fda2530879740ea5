#include <algorithm>
#include <cmath>
#include <random>

#include "ogs/errors.hpp"
#include "ogs/mapping.hpp"

namespace ogs {

std::vector<std::uint32_t> match_cross_pair(const PointmapPair& pair_prev, const PointmapPair& pair_curr) {
  if (pair_prev.width != pair_curr.width || pair_prev.height != pair_curr.height) {
    throw InvalidArgument("match_cross_pair: pairs differ in size");
  }
  if (pair_prev.frame_b != pair_curr.frame_a) {
    throw InvalidArgument("match_cross_pair: pairs do not share a frame");
  }
  std::vector<std::uint32_t> out;
  for (std::size_t i = 0; i < pair_prev.pixel_count(); ++i) {
    if (pair_prev.valid2[i] && pair_curr.valid1[i]) out.push_back(static_cast<std::uint32_t>(i));
  }
  return out;
}

double scale_ratio(const PointmapPair& pair_prev, const PointmapPair& pair_curr, std::span<const std::uint32_t> matches,
                   int n_samples, std::uint64_t seed, ScaleRatioMode mode) {
  if (matches.size() < 2) throw InsufficientMatches("scale_ratio: fewer than 2 matches");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, matches.size() - 1);
  std::vector<double> ratios;
  ratios.reserve(static_cast<std::size_t>(std::max(n_samples, 0)));
  for (int s = 0; s < n_samples; ++s) {
    const std::size_t i = matches[pick(rng)];
    std::size_t j = matches[pick(rng)];
    if (i == j) continue;
    Eigen::Vector3f num, den;
    if (mode == ScaleRatioMode::cross_frame) {
      num = pair_curr.X1[i] - pair_curr.X2[j];
      den = pair_prev.X1[i] - pair_prev.X2[j];
    } else {
      num = pair_curr.X1[i] - pair_curr.X1[j];
      den = pair_prev.X2[i] - pair_prev.X2[j];
    }
    const double n = num.cast<double>().norm(), d = den.cast<double>().norm();
    if (!std::isfinite(n) || !std::isfinite(d) || d < 1e-6) continue;
    ratios.push_back(n / d);
  }
  if (ratios.size() < 2) throw InsufficientMatches("scale_ratio: fewer than 2 usable samples");
  std::sort(ratios.begin(), ratios.end());
  const std::size_t trim = ratios.size() / 5;
  double sum = 0.0;
  for (std::size_t k = trim; k < ratios.size() - trim; ++k) sum += ratios[k];
  return sum / static_cast<double>(ratios.size() - 2 * trim);
}

double update_cumulative_scale(ScaleState& state, double rho_bar) {
  if (!(rho_bar > 0.0) || !std::isfinite(rho_bar)) {
    throw InvalidArgument("update_cumulative_scale: ratio must be positive and finite");
  }
  const double rho = std::clamp(rho_bar, kMinStepRatio, kMaxStepRatio);
  state.cumulative *= rho;
  state.history.push_back(rho);
  return state.cumulative;
}

}  // namespace ogs
