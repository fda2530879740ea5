#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "ogs/dataset.hpp"
#include "ogs/errors.hpp"

namespace ogs {

namespace {

// TUM stores camera-to-world; the engine keeps world-to-camera.
Pose from_twc(const Eigen::Vector3d& t, const Eigen::Vector4d& q_xyzw) {
  Pose T_wc;
  T_wc.rotation = quat_to_rot(Eigen::Vector4d(q_xyzw[3], q_xyzw[0], q_xyzw[1], q_xyzw[2]));
  T_wc.translation = t;
  return T_wc.inverse();
}

}  // namespace

Pose parse_tum_pose(const std::string& text) {
  std::istringstream s(text);
  Eigen::Vector3d t;
  Eigen::Vector4d q;
  std::string extra;
  if (!(s >> t[0] >> t[1] >> t[2] >> q[0] >> q[1] >> q[2] >> q[3]) || (s >> extra)) {
    throw InvalidArgument("expected 'tx ty tz qx qy qz qw', got '" + text + "'");
  }
  if (!t.allFinite() || !q.allFinite() || q.norm() < 1e-12) throw InvalidArgument("invalid pose '" + text + "'");
  return from_twc(t, q);
}

std::string format_tum_line(double timestamp, const Pose& T_cw) {
  const Pose T_wc = T_cw.inverse();
  const Eigen::Vector4d q = rot_to_quat(T_wc.rotation);
  std::ostringstream s;
  s << std::setprecision(17) << timestamp << ' ' << T_wc.translation[0] << ' ' << T_wc.translation[1] << ' '
    << T_wc.translation[2] << ' ' << q[1] << ' ' << q[2] << ' ' << q[3] << ' ' << q[0];
  return s.str();
}

Trajectory read_tum(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw InvalidArgument("cannot read trajectory " + path.string());
  Trajectory out;
  std::string line;
  int n = 0;
  while (std::getline(f, line)) {
    ++n;
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos || line[b] == '#') continue;
    std::istringstream s(line);
    double ts = 0.0;
    if (!(s >> ts)) throw InvalidArgument(path.string() + ":" + std::to_string(n) + ": bad timestamp");
    std::string rest;
    std::getline(s, rest);
    try {
      out.push_back({static_cast<int>(out.size()), ts, parse_tum_pose(rest)});
    } catch (const InvalidArgument& e) {
      throw InvalidArgument(path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

void write_tum(const std::filesystem::path& path, const Trajectory& trajectory) {
  std::ofstream f(path);
  if (!f) throw InvalidArgument("cannot write trajectory " + path.string());
  for (const auto& e : trajectory) f << format_tum_line(e.timestamp, e.T_cw) << '\n';
  if (!f) throw InvalidArgument("error writing " + path.string());
}

double trajectory_length(const Trajectory& t) {
  double len = 0.0;
  for (std::size_t i = 1; i < t.size(); ++i) len += (t[i].T_cw.center() - t[i - 1].T_cw.center()).norm();
  return len;
}

CameraIntrinsics read_intrinsics(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw InvalidArgument("cannot read intrinsics " + path.string());
  CameraIntrinsics K;
  if (!(f >> K.fx >> K.fy >> K.cx >> K.cy >> K.width >> K.height)) {
    throw InvalidArgument(path.string() + ": expected 'fx fy cx cy width height'");
  }
  if (!(K.fx > 0 && K.fy > 0) || K.width <= 0 || K.height <= 0) {
    throw InvalidArgument(path.string() + ": invalid intrinsics");
  }
  return K;
}

void write_intrinsics(const std::filesystem::path& path, const CameraIntrinsics& K) {
  std::ofstream f(path);
  if (!f) throw InvalidArgument("cannot write intrinsics " + path.string());
  f << std::setprecision(17) << K.fx << ' ' << K.fy << ' ' << K.cx << ' ' << K.cy << ' ' << K.width << ' '
    << K.height << '\n';
}

std::filesystem::path SequenceDataset::frame_path(int idx) const {
  char name[32];
  std::snprintf(name, sizeof name, "%06d.png", idx);
  return root / "frames" / name;
}

Image SequenceDataset::load_frame(int idx) const {
  if (idx < 0 || idx >= n_frames) throw InvalidArgument("frame " + std::to_string(idx) + " out of range");
  Image img = read_png(frame_path(idx));
  if (img.width != K.width || img.height != K.height) {
    throw InvalidArgument(frame_path(idx).string() + ": size does not match intrinsics");
  }
  return img;
}

SequenceDataset open_dataset(const std::filesystem::path& root) {
  SequenceDataset ds;
  ds.root = root;
  if (!std::filesystem::is_directory(root)) throw InvalidArgument("not a directory: " + root.string());
  ds.K = read_intrinsics(root / "intrinsics.txt");
  while (std::filesystem::exists(ds.frame_path(ds.n_frames))) ++ds.n_frames;
  if (ds.n_frames == 0) throw InvalidArgument("no frames in " + (root / "frames").string());
  if (std::filesystem::exists(root / "groundtruth.txt")) {
    ds.groundtruth = read_tum(root / "groundtruth.txt");
    if (static_cast<int>(ds.groundtruth->size()) != ds.n_frames) {
      throw InvalidArgument("groundtruth.txt has " + std::to_string(ds.groundtruth->size()) + " poses for " +
                            std::to_string(ds.n_frames) + " frames");
    }
    for (const auto& e : *ds.groundtruth) ds.timestamps.push_back(e.timestamp);
  } else {
    for (int i = 0; i < ds.n_frames; ++i) ds.timestamps.push_back(static_cast<double>(i));
  }
  return ds;
}

}  // namespace ogs
