#include <algorithm>
#include <iterator>

#include "ogs/mapping.hpp"

namespace ogs {

std::vector<std::uint32_t> visible_set(const GaussianMap& map, const Pose& T_cw, const CameraIntrinsics& K) {
  // Culling already uses the footprint where alpha can reach 1/255.
  return visible_gaussians(map, T_cw, K);
}

double covisibility(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b) {
  if (a.empty() && b.empty()) return 0.0;
  std::size_t inter = 0;
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      ++inter;
      ++i;
      ++j;
    }
  }
  return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

double covisibility(const Keyframe& a, const Keyframe& b, const GaussianMap& map, const CameraIntrinsics& K) {
  const auto va = visible_set(map, a.pose, K);
  const auto vb = visible_set(map, b.pose, K);
  return covisibility(va, vb);
}

double coverage(const RenderOutput& out, double min_alpha) {
  const std::size_t n = out.alpha.pixel_count();
  if (n == 0) return 0.0;
  const auto covered = std::count_if(out.alpha.data.begin(), out.alpha.data.end(),
                                     [&](double a) { return a >= min_alpha; });
  return static_cast<double>(covered) / static_cast<double>(n);
}

bool should_insert_keyframe(bool first_frame, double covis_with_last, double cov, const KeyframePolicy& policy) {
  if (first_frame) return true;
  return covis_with_last < policy.min_covisibility || cov < policy.min_coverage;
}

std::vector<int> update_window(LocalWindow& window, int new_kf, const std::function<double(int)>& overlap_with_new) {
  window.keyframes.push_back(new_kf);
  std::vector<int> evicted;
  std::vector<std::pair<int, double>> others;
  for (int id : window.keyframes) {
    if (id != new_kf) others.emplace_back(id, overlap_with_new(id));
  }
  std::vector<std::pair<int, double>> kept;
  for (const auto& o : others) {
    if (o.second < window.min_overlap) {
      evicted.push_back(o.first);
    } else {
      kept.push_back(o);
    }
  }
  while (kept.size() + 1 > window.capacity && !kept.empty()) {
    // Lowest overlap goes; on ties the oldest.
    auto worst = std::min_element(kept.begin(), kept.end(),
                                  [](const auto& x, const auto& y) { return x.second < y.second; });
    evicted.push_back(worst->first);
    kept.erase(worst);
  }
  window.keyframes.clear();
  for (const auto& k : kept) window.keyframes.push_back(k.first);
  window.keyframes.push_back(new_kf);
  return evicted;
}

}  // namespace ogs
