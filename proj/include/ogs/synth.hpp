#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>

#include "ogs/dataset.hpp"
#include "ogs/pointmap.hpp"

namespace ogs {

enum class TrajectoryKind { straight, turn, slope };

TrajectoryKind parse_trajectory_kind(const std::string& s);

struct SynthOptions {
  int n_frames = 50;
  TrajectoryKind kind = TrajectoryKind::turn;
  std::size_t n_points = 300000;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
};

/// The camera every synthetic sequence uses: 128x96, 90 degree horizontal field of view.
CameraIntrinsics synthetic_intrinsics();

/// Textured corridor scene (L-shaped for turns) sampled with roughly
/// n_points points, and the ground-truth camera path through it.
struct SyntheticWorld {
  SceneCloud cloud;
  double spacing = 0.0;  // mean distance between neighbouring surface samples
  Trajectory trajectory;
};

SyntheticWorld make_synthetic_world(const SynthOptions& options);

/// Writes a complete sequence: frames rendered from dense tiny Gaussians,
/// intrinsics, ground truth, pointmap pairs, and synthetic.txt holding the
/// generator options so the synthetic provider can rebuild the scene.
SequenceDataset synth_dataset(const SynthOptions& options, const std::filesystem::path& out_dir);

/// Synthetic provider for a directory written by synth_dataset.
std::unique_ptr<PointmapProvider> open_synthetic_provider(const SequenceDataset& dataset);

}  // namespace ogs
