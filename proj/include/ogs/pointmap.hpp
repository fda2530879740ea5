#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "ogs/geometry.hpp"
#include "ogs/image.hpp"
#include "ogs/rasterizer.hpp"

namespace ogs {

/// Per-pixel 3D points for two frames. X1 holds frame a's pixels and X2 frame
/// b's pixels, both expressed in frame a's camera coordinates at the
/// provider's (unknown) scale. Invalid pixels hold NaN points.
struct PointmapPair {
  std::uint64_t frame_a = 0;
  std::uint64_t frame_b = 0;
  int width = 0;
  int height = 0;
  std::vector<Eigen::Vector3f> X1, X2;
  std::vector<float> conf1, conf2;
  std::vector<std::uint8_t> valid1, valid2;

  static PointmapPair empty(std::uint64_t frame_a, std::uint64_t frame_b, int width, int height);
  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  /// Recomputes the masks from point finiteness and clears invalid confidences.
  void derive_masks();
};

void save_pair(const PointmapPair& pair, const std::filesystem::path& path);
/// Throws FormatError on bad magic, unsupported version or truncation.
PointmapPair load_pair(const std::filesystem::path& path);

struct ProviderCapability {
  int width = 0;
  int height = 0;
  bool deterministic = true;
};

/// Seam to a pointmap regression model.
class PointmapProvider {
 public:
  virtual ~PointmapProvider() = default;
  virtual ProviderCapability capability() const = 0;
  virtual PointmapPair regress(const Image& image_a, const Image& image_b, std::uint64_t frame_a,
                               std::uint64_t frame_b) = 0;
};

/// Checks the inputs against the provider and reports every failure as a
/// ProviderError naming the pair.
PointmapPair regress_pair(PointmapProvider& provider, const Image& image_a, const Image& image_b,
                          std::uint64_t frame_a, std::uint64_t frame_b);

/// File name of a stored pair, e.g. 000003_000004.ogpm.
std::string pair_file_name(std::uint64_t frame_a, std::uint64_t frame_b);

/// Reads pre-computed pairs from <dir>/<a>_<b>.ogpm.
class FilePointmapProvider : public PointmapProvider {
 public:
  FilePointmapProvider(std::filesystem::path dir, int width, int height);
  ProviderCapability capability() const override { return {width_, height_, true}; }
  PointmapPair regress(const Image& image_a, const Image& image_b, std::uint64_t frame_a,
                       std::uint64_t frame_b) override;

 private:
  std::filesystem::path dir_;
  int width_;
  int height_;
};

struct SceneCloud {
  std::vector<Eigen::Vector3d> points;
  std::vector<Eigen::Vector3d> colors;
  /// Optional surface normals. When present, pixel depths come from the ray
  /// through the pixel center hitting the point's tangent plane.
  std::vector<Eigen::Vector3d> normals;
};

struct SynthPairOptions {
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
  /// World-space radius used to splat each point into the depth buffer so a
  /// sampled surface has no pinholes. 0 marks only the nearest pixel.
  double point_radius = 0.0;
};

/// Ground-truth pointmap pair. A pixel is valid when some scene point lands
/// on it; its point lies on the pixel-center ray at the nearest such point's
/// depth (or tangent-plane hit, given normals), so exact pairs reproject onto
/// pixel centers.
PointmapPair synth_pair(const SceneCloud& scene, const Pose& T_a, const Pose& T_b, const CameraIntrinsics& K,
                        std::uint64_t frame_a, std::uint64_t frame_b, const SynthPairOptions& options = {});

/// Test-oracle provider: synthesizes pairs from a known scene and known poses.
class SyntheticPointmapProvider : public PointmapProvider {
 public:
  SyntheticPointmapProvider(SceneCloud scene, std::map<std::uint64_t, Pose> poses, CameraIntrinsics K,
                            SynthPairOptions options);
  ProviderCapability capability() const override { return {K_.width, K_.height, true}; }
  PointmapPair regress(const Image& image_a, const Image& image_b, std::uint64_t frame_a,
                       std::uint64_t frame_b) override;

 private:
  SceneCloud scene_;
  std::map<std::uint64_t, Pose> poses_;
  CameraIntrinsics K_;
  SynthPairOptions options_;
};

}  // namespace ogs
