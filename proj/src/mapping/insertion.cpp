#include <algorithm>
#include <cmath>

#include "ogs/errors.hpp"
#include "ogs/mapping.hpp"

namespace ogs {

namespace {

struct Block {
  int x0, y0, x1, y1;  // half-open
};

// Index of the highest-confidence valid pixel in the block, first in scan
// order on ties, or -1.
long best_in_block(const Block& b, int width, const std::vector<std::uint8_t>& valid, const std::vector<float>& conf) {
  long best = -1;
  for (int y = b.y0; y < b.y1; ++y) {
    for (int x = b.x0; x < b.x1; ++x) {
      const long i = static_cast<long>(y) * width + x;
      if (valid[i] && (best < 0 || conf[i] > conf[best])) best = i;
    }
  }
  return best;
}

double depth_variance(const Block& b, int width, const std::vector<std::uint8_t>& valid,
                      const std::vector<Eigen::Vector3f>& X) {
  double sum = 0.0, sq = 0.0;
  int n = 0;
  for (int y = b.y0; y < b.y1; ++y) {
    for (int x = b.x0; x < b.x1; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * width + x;
      if (!valid[i]) continue;
      const double z = X[i].z();
      sum += z;
      sq += z * z;
      ++n;
    }
  }
  if (n < 2) return -1.0;
  const double mean = sum / n;
  return std::max(0.0, sq / n - mean * mean);
}

}  // namespace

std::vector<SampledPoint> subsample_pointmap(const PointmapPair& pair, int cell, PointmapSide side) {
  if (cell < 1) throw InvalidArgument("subsample_pointmap: cell must be >= 1");
  const auto& X = side == PointmapSide::first ? pair.X1 : pair.X2;
  const auto& valid = side == PointmapSide::first ? pair.valid1 : pair.valid2;
  const auto& conf = side == PointmapSide::first ? pair.conf1 : pair.conf2;
  const int W = pair.width, H = pair.height;

  std::vector<Block> blocks;
  for (int y = 0; y < H; y += cell)
    for (int x = 0; x < W; x += cell) blocks.push_back({x, y, std::min(x + cell, W), std::min(y + cell, H)});

  std::vector<double> var(blocks.size());
  std::vector<double> defined;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    var[b] = depth_variance(blocks[b], W, valid, X);
    if (var[b] >= 0.0) defined.push_back(var[b]);
  }
  double median = 0.0;
  if (!defined.empty()) {
    auto mid = defined.begin() + static_cast<std::ptrdiff_t>(defined.size() / 2);
    std::nth_element(defined.begin(), mid, defined.end());
    median = *mid;
  }

  std::vector<SampledPoint> out;
  auto emit = [&](long i) {
    if (i < 0) return;
    out.push_back({X[i].cast<double>(), static_cast<int>(i % W), static_cast<int>(i / W)});
  };
  const int half = cell / 2;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const Block& bl = blocks[b];
    if (half >= 1 && var[b] > 4.0 * median) {
      for (int y = bl.y0; y < bl.y1; y += half)
        for (int x = bl.x0; x < bl.x1; x += half)
          emit(best_in_block({x, y, std::min(x + half, bl.x1), std::min(y + half, bl.y1)}, W, valid, conf));
    } else {
      emit(best_in_block(bl, W, valid, conf));
    }
  }
  return out;
}

KeyframeInsertion insert_at_keyframe(GaussianMap& map, std::span<const SampledPoint> samples, const Pose& pair_to_kf,
                                     double point_scale, const Pose& T_kf, const CameraIntrinsics& K,
                                     const Image& image, int kf_idx, const InsertOptions& options) {
  if (!(point_scale > 0.0)) throw InvalidArgument("insert_at_keyframe: point scale must be positive");
  if (image.width != K.width || image.height != K.height || image.channels != 3) {
    throw InvalidArgument("insert_at_keyframe: image does not match the intrinsics");
  }
  KeyframeInsertion res;
  RenderOutput rendered;
  const bool check = !map.empty();
  if (check) rendered = render(map, T_kf, K, {options.background, options.threads});

  const Pose kf_to_world = T_kf.inverse();
  std::vector<Eigen::Vector3d> points, colors;
  for (const auto& s : samples) {
    const Eigen::Vector3d p_kf = point_scale * pair_to_kf.apply(s.point);
    if (!p_kf.allFinite()) continue;
    if (check) {
      const std::size_t pix = static_cast<std::size_t>(s.y) * K.width + s.x;
      const double a = rendered.alpha.data[pix];
      if (a >= options.explained_alpha && p_kf.z() > 0.0) {
        const double z = rendered.depth.data[pix] / a;
        if (std::abs(z - p_kf.z()) < options.explained_depth_rel * p_kf.z()) {
          ++res.explained;
          continue;
        }
      }
    }
    points.push_back(kf_to_world.apply(p_kf));
    colors.push_back(image.rgb(static_cast<std::size_t>(s.y) * K.width + s.x));
  }
  res.inserted = map.insert_from_points(points, colors, kf_idx).inserted;
  return res;
}

}  // namespace ogs
