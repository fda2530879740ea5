#include <cstdio>

#include "ogs/errors.hpp"
#include "ogs/pointmap.hpp"

namespace ogs {

std::string pair_file_name(std::uint64_t frame_a, std::uint64_t frame_b) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%06llu_%06llu.ogpm", static_cast<unsigned long long>(frame_a),
                static_cast<unsigned long long>(frame_b));
  return buf;
}

PointmapPair regress_pair(PointmapProvider& provider, const Image& image_a, const Image& image_b,
                          std::uint64_t frame_a, std::uint64_t frame_b) {
  const ProviderCapability cap = provider.capability();
  for (const Image* im : {&image_a, &image_b}) {
    if (im->width != cap.width || im->height != cap.height) {
      throw ProviderError("image is " + std::to_string(im->width) + "x" + std::to_string(im->height) +
                              ", provider expects " + std::to_string(cap.width) + "x" + std::to_string(cap.height),
                          frame_a, frame_b);
    }
  }
  PointmapPair pair;
  try {
    pair = provider.regress(image_a, image_b, frame_a, frame_b);
  } catch (const ProviderError&) {
    throw;
  } catch (const Error& e) {
    throw ProviderError(e.what(), frame_a, frame_b);
  }
  if (pair.width != cap.width || pair.height != cap.height || pair.X1.size() != pair.pixel_count() ||
      pair.X2.size() != pair.pixel_count() || pair.conf1.size() != pair.pixel_count() ||
      pair.conf2.size() != pair.pixel_count()) {
    throw ProviderError("provider returned a pair of the wrong size", frame_a, frame_b);
  }
  if (pair.frame_a != frame_a || pair.frame_b != frame_b) {
    throw ProviderError("provider returned a pair for other frames", frame_a, frame_b);
  }
  pair.derive_masks();
  return pair;
}

FilePointmapProvider::FilePointmapProvider(std::filesystem::path dir, int width, int height)
    : dir_(std::move(dir)), width_(width), height_(height) {}

PointmapPair FilePointmapProvider::regress(const Image&, const Image&, std::uint64_t frame_a,
                                           std::uint64_t frame_b) {
  const auto path = dir_ / pair_file_name(frame_a, frame_b);
  if (!std::filesystem::exists(path)) throw ProviderError("missing " + path.string(), frame_a, frame_b);
  try {
    return load_pair(path);
  } catch (const FormatError& e) {
    throw ProviderError(e.what(), frame_a, frame_b);
  }
}

SyntheticPointmapProvider::SyntheticPointmapProvider(SceneCloud scene, std::map<std::uint64_t, Pose> poses,
                                                     CameraIntrinsics K, SynthPairOptions options)
    : scene_(std::move(scene)), poses_(std::move(poses)), K_(K), options_(options) {}

PointmapPair SyntheticPointmapProvider::regress(const Image&, const Image&, std::uint64_t frame_a,
                                                std::uint64_t frame_b) {
  const auto a = poses_.find(frame_a), b = poses_.find(frame_b);
  if (a == poses_.end() || b == poses_.end()) throw ProviderError("no pose for frame", frame_a, frame_b);
  SynthPairOptions o = options_;
  // Each pair gets its own noise stream, independent of call order.
  o.seed = options_.seed ^ (frame_a * 0x9E3779B97F4A7C15ULL) ^ (frame_b * 0xC2B2AE3D27D4EB4FULL);
  return synth_pair(scene_, a->second, b->second, K_, frame_a, frame_b, o);
}

}  // namespace ogs
