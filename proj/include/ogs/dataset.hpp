#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "ogs/geometry.hpp"
#include "ogs/image.hpp"
#include "ogs/rasterizer.hpp"

namespace ogs {

/// 8-bit RGB(A) PNG in, doubles in [0, 1] out. Alpha is dropped.
Image read_png(const std::filesystem::path& path);
/// Values are clamped to [0, 1] and rounded to 8 bits.
void write_png(const std::filesystem::path& path, const Image& image);

struct TrajectoryEntry {
  int frame_idx = 0;
  double timestamp = 0.0;
  Pose T_cw;
};

using Trajectory = std::vector<TrajectoryEntry>;

/// TUM lines `timestamp tx ty tz qx qy qz qw` describing the camera-to-world
/// transform. Frame indices are assigned in file order.
Trajectory read_tum(const std::filesystem::path& path);
void write_tum(const std::filesystem::path& path, const Trajectory& trajectory);
std::string format_tum_line(double timestamp, const Pose& T_cw);
Pose parse_tum_pose(const std::string& text);  // "tx ty tz qx qy qz qw"

/// Sum of distances between consecutive camera centers.
double trajectory_length(const Trajectory& t);

CameraIntrinsics read_intrinsics(const std::filesystem::path& path);
void write_intrinsics(const std::filesystem::path& path, const CameraIntrinsics& K);

/// Directory layout: frames/%06d.png, intrinsics.txt, optional groundtruth.txt
/// (TUM) and optional pointmaps/%06d_%06d.ogpm.
struct SequenceDataset {
  std::filesystem::path root;
  CameraIntrinsics K;
  int n_frames = 0;
  std::vector<double> timestamps;
  std::optional<Trajectory> groundtruth;

  std::filesystem::path frame_path(int idx) const;
  std::filesystem::path pointmap_dir() const { return root / "pointmaps"; }
  Image load_frame(int idx) const;
};

/// Throws InvalidArgument if the directory is not a readable sequence.
SequenceDataset open_dataset(const std::filesystem::path& root);

}  // namespace ogs
