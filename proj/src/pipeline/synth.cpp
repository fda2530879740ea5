#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include <Eigen/Geometry>

#include "ogs/errors.hpp"
#include "ogs/synth.hpp"

namespace ogs {

namespace {

constexpr double kHalfWidth = 1.0;
constexpr double kHalfHeight = 0.8;
constexpr double kBack = -0.8;     // back wall, behind the first camera
constexpr double kLookahead = 2.5;  // distance from the last camera to the end wall
constexpr double kFrameInterval = 0.1;

// Turn: straight leg, 90 degree right-hand arc, straight leg.
constexpr double kTurnLeg = 1.2;
constexpr double kTurnRadius = 1.5;
constexpr double kStraightLength = 3.0;
constexpr double kSlopeMaxPitch = 15.0 * std::numbers::pi / 180.0;

struct Rect {
  Eigen::Vector3d origin, a, b;  // spans origin + [0,1] a + [0,1] b
  Eigen::Vector3d tint;
};

// Camera looking along heading psi (0 = +z, positive turns toward +x) with
// pitch phi (positive looks up; world up is -y).
Pose camera_pose(const Eigen::Vector3d& position, double psi, double phi) {
  const Eigen::Vector3d fwd(std::sin(psi) * std::cos(phi), -std::sin(phi), std::cos(psi) * std::cos(phi));
  const Eigen::Vector3d right(std::cos(psi), 0.0, -std::sin(psi));
  const Eigen::Vector3d down = fwd.cross(right);
  Pose T_wc;
  T_wc.rotation.col(0) = right;
  T_wc.rotation.col(1) = down;
  T_wc.rotation.col(2) = fwd;
  T_wc.translation = position;
  return T_wc.inverse();
}

struct PathPose {
  Eigen::Vector3d position;
  double psi = 0.0, phi = 0.0;
};

double path_length(TrajectoryKind kind) {
  if (kind == TrajectoryKind::turn) return 2.0 * kTurnLeg + kTurnRadius * std::numbers::pi / 2.0;
  return kStraightLength;
}

double smoothstep(double t) {
  t = std::clamp(t, 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

PathPose path_at(TrajectoryKind kind, double s) {
  PathPose p;
  switch (kind) {
    case TrajectoryKind::straight:
      p.position = {0.0, 0.0, s};
      break;
    case TrajectoryKind::turn: {
      const double arc = kTurnRadius * std::numbers::pi / 2.0;
      if (s <= kTurnLeg) {
        p.position = {0.0, 0.0, s};
      } else if (s <= kTurnLeg + arc) {
        const double a = (s - kTurnLeg) / kTurnRadius;
        p.position = {kTurnRadius * (1.0 - std::cos(a)), 0.0, kTurnLeg + kTurnRadius * std::sin(a)};
        p.psi = a;
      } else {
        p.position = {kTurnRadius + (s - kTurnLeg - arc), 0.0, kTurnLeg + kTurnRadius};
        p.psi = std::numbers::pi / 2.0;
      }
      break;
    }
    case TrajectoryKind::slope: {
      // Pitch eases in over the first half; position integrates the heading.
      constexpr int kSteps = 2000;
      Eigen::Vector3d x = Eigen::Vector3d::Zero();
      const double ds = s / kSteps;
      for (int i = 0; i < kSteps; ++i) {
        const double phi = kSlopeMaxPitch * smoothstep(2.0 * (i + 0.5) * ds / kStraightLength);
        x += ds * Eigen::Vector3d(0.0, -std::sin(phi), std::cos(phi));
      }
      p.position = x;
      p.phi = kSlopeMaxPitch * smoothstep(2.0 * s / kStraightLength);
      break;
    }
  }
  return p;
}

std::vector<Rect> corridor(TrajectoryKind kind, double rise) {
  const double W = kHalfWidth, H = kHalfHeight;
  const double top = -H - rise;  // ceiling; raised for the slope
  const double h = H - top;
  std::vector<Rect> r;
  auto wall_x = [&](double x, double z0, double z1, Eigen::Vector3d tint) {
    r.push_back({{x, top, z0}, {0, 0, z1 - z0}, {0, h, 0}, tint});
  };
  auto wall_z = [&](double z, double x0, double x1, Eigen::Vector3d tint) {
    r.push_back({{x0, top, z}, {x1 - x0, 0, 0}, {0, h, 0}, tint});
  };
  auto flat = [&](double y, double x0, double x1, double z0, double z1, Eigen::Vector3d tint) {
    r.push_back({{x0, y, z0}, {x1 - x0, 0, 0}, {0, 0, z1 - z0}, tint});
  };
  const Eigen::Vector3d wall_l(0.75, 0.45, 0.35), wall_r(0.35, 0.55, 0.75), end(0.55, 0.7, 0.4),
      floor(0.5, 0.5, 0.45), ceiling(0.8, 0.78, 0.7);
  if (kind == TrajectoryKind::turn) {
    const double zc = kTurnLeg + kTurnRadius;  // centerline of the second leg
    const double z_in = zc - W, z_far = zc + W;
    const double x_end = kTurnRadius + kTurnLeg + kLookahead;
    wall_z(kBack, -W, W, end);
    wall_x(-W, kBack, z_far, wall_l);
    wall_x(W, kBack, z_in, wall_r);
    wall_z(z_far, -W, x_end, wall_l);
    wall_z(z_in, W, x_end, wall_r);
    wall_x(x_end, z_in, z_far, end);
    flat(H, -W, W, kBack, z_far, floor);
    flat(H, W, x_end, z_in, z_far, floor);
    flat(top, -W, W, kBack, z_far, ceiling);
    flat(top, W, x_end, z_in, z_far, ceiling);
  } else {
    const double z_far = path_at(kind, kStraightLength).position.z() + kLookahead;
    wall_z(kBack, -W, W, end);
    wall_x(-W, kBack, z_far, wall_l);
    wall_x(W, kBack, z_far, wall_r);
    wall_z(z_far, -W, W, end);
    flat(H, -W, W, kBack, z_far, floor);
    flat(top, -W, W, kBack, z_far, ceiling);
  }
  return r;
}

// Smooth band-limited color field: a few random plane waves per channel.
struct Texture {
  struct Wave {
    Eigen::Vector3d k;
    double phase, amp;
  };
  std::array<std::vector<Wave>, 3> waves;

  explicit Texture(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> n(0.0, 1.0);
    for (auto& ch : waves) {
      for (int i = 0; i < 4; ++i) {
        Eigen::Vector3d dir(n(rng), n(rng), n(rng));
        dir.normalize();
        const double wavelength = 0.25 + 0.5 * u(rng);
        ch.push_back({dir * (2.0 * std::numbers::pi / wavelength), 2.0 * std::numbers::pi * u(rng), 0.07 + 0.05 * u(rng)});
      }
    }
  }

  Eigen::Vector3d at(const Eigen::Vector3d& p, const Eigen::Vector3d& tint) const {
    Eigen::Vector3d c = tint;
    for (int ch = 0; ch < 3; ++ch)
      for (const auto& w : waves[ch]) c[ch] += w.amp * std::sin(w.k.dot(p) + w.phase);
    return c.cwiseMax(0.0).cwiseMin(1.0);
  }
};

const char* kind_name(TrajectoryKind k) {
  switch (k) {
    case TrajectoryKind::straight: return "straight";
    case TrajectoryKind::turn: return "turn";
    case TrajectoryKind::slope: return "slope";
  }
  return "?";
}

}  // namespace

TrajectoryKind parse_trajectory_kind(const std::string& s) {
  if (s == "straight") return TrajectoryKind::straight;
  if (s == "turn") return TrajectoryKind::turn;
  if (s == "slope") return TrajectoryKind::slope;
  throw InvalidArgument("unknown trajectory kind '" + s + "' (straight|turn|slope)");
}

CameraIntrinsics synthetic_intrinsics() { return {64.0, 64.0, 63.5, 47.5, 128, 96}; }

SyntheticWorld make_synthetic_world(const SynthOptions& options) {
  if (options.n_frames < 2) throw InvalidArgument("synthetic sequence needs at least 2 frames");
  if (options.n_points < 100) throw InvalidArgument("synthetic scene needs at least 100 points");
  if (!(options.noise_sigma >= 0.0)) throw InvalidArgument("noise must be >= 0");

  SyntheticWorld world;
  const double L = path_length(options.kind);
  for (int i = 0; i < options.n_frames; ++i) {
    const PathPose p = path_at(options.kind, L * i / (options.n_frames - 1));
    world.trajectory.push_back({i, kFrameInterval * i, camera_pose(p.position, p.psi, p.phi)});
  }

  const double rise = options.kind == TrajectoryKind::slope ? -path_at(options.kind, L).position.y() : 0.0;
  const std::vector<Rect> rects = corridor(options.kind, rise);
  double area = 0.0;
  for (const auto& r : rects) area += r.a.norm() * r.b.norm();
  const double h = std::sqrt(area / static_cast<double>(options.n_points));
  world.spacing = h;

  // Jittered grid: even coverage without visible regularity.
  std::mt19937_64 rng(options.seed);
  const Texture tex(rng);
  std::uniform_real_distribution<double> jitter(0.0, 1.0);
  for (const auto& r : rects) {
    const Eigen::Vector3d normal = r.a.cross(r.b).normalized();
    const int na = std::max(1, static_cast<int>(std::lround(r.a.norm() / h)));
    const int nb = std::max(1, static_cast<int>(std::lround(r.b.norm() / h)));
    for (int j = 0; j < nb; ++j)
      for (int i = 0; i < na; ++i) {
        const double s = (i + jitter(rng)) / na, t = (j + jitter(rng)) / nb;
        const Eigen::Vector3d p = r.origin + s * r.a + t * r.b;
        world.cloud.points.push_back(p);
        world.cloud.colors.push_back(tex.at(p, r.tint));
        world.cloud.normals.push_back(normal);
      }
  }
  return world;
}

namespace {

SynthPairOptions pair_options(const SyntheticWorld& world, const SynthOptions& options) {
  return {options.noise_sigma, options.seed, 0.75 * world.spacing};
}

std::unique_ptr<PointmapProvider> make_provider(SyntheticWorld world, const SynthOptions& options) {
  std::map<std::uint64_t, Pose> poses;
  for (const auto& e : world.trajectory) poses[static_cast<std::uint64_t>(e.frame_idx)] = e.T_cw;
  const SynthPairOptions po = pair_options(world, options);
  return std::make_unique<SyntheticPointmapProvider>(std::move(world.cloud), std::move(poses), synthetic_intrinsics(),
                                                     po);
}

}  // namespace

SequenceDataset synth_dataset(const SynthOptions& options, const std::filesystem::path& out_dir) {
  SyntheticWorld world = make_synthetic_world(options);
  const CameraIntrinsics K = synthetic_intrinsics();
  try {
    std::filesystem::create_directories(out_dir / "frames");
    std::filesystem::create_directories(out_dir / "pointmaps");
  } catch (const std::filesystem::filesystem_error& e) {
    throw InvalidArgument(std::string("cannot create dataset directory: ") + e.what());
  }
  write_intrinsics(out_dir / "intrinsics.txt", K);
  write_tum(out_dir / "groundtruth.txt", world.trajectory);
  {
    std::ofstream f(out_dir / "synthetic.txt");
    if (!f) throw InvalidArgument("cannot write " + (out_dir / "synthetic.txt").string());
    f << "frames " << options.n_frames << "\nkind " << kind_name(options.kind) << "\npoints " << options.n_points
      << "\nnoise " << std::setprecision(17) << options.noise_sigma << "\nseed " << options.seed << '\n';
  }

  // Ground-truth images from dense, nearly opaque surfels lying in the
  // surface. Round blobs would put the apparent surface in front of the true
  // one (rays saturate on the blobs' near halves), biasing depth by a few
  // percent at grazing angles.
  GaussianMap scene;
  const double sigma = 0.6 * world.spacing;
  for (std::size_t i = 0; i < world.cloud.points.size(); ++i) {
    Gaussian3D g;
    g.mean = world.cloud.points[i];
    const Eigen::Quaterniond q = Eigen::Quaterniond::FromTwoVectors(Eigen::Vector3d::UnitZ(), world.cloud.normals[i]);
    g.rot = Eigen::Vector4d(q.w(), q.x(), q.y(), q.z());
    g.log_scale = Eigen::Vector3d(std::log(sigma), std::log(sigma), std::log(0.02 * sigma));
    g.opacity_logit = logit(0.95);
    g.color = world.cloud.colors[i];
    scene.add(g);
  }
  SequenceDataset ds;
  ds.root = out_dir;
  ds.K = K;
  ds.n_frames = options.n_frames;
  for (const auto& e : world.trajectory) {
    const RenderOutput out = render(scene, e.T_cw, K, {Eigen::Vector3d::Zero(), 0});
    write_png(ds.frame_path(e.frame_idx), out.color);
    ds.timestamps.push_back(e.timestamp);
  }
  ds.groundtruth = world.trajectory;

  auto provider = make_provider(std::move(world), options);
  const Image none;
  for (int k = 0; k + 1 < options.n_frames; ++k) {
    const auto a = static_cast<std::uint64_t>(k), b = a + 1;
    save_pair(provider->regress(none, none, a, b), ds.pointmap_dir() / pair_file_name(a, b));
  }
  return ds;
}

std::unique_ptr<PointmapProvider> open_synthetic_provider(const SequenceDataset& dataset) {
  const auto path = dataset.root / "synthetic.txt";
  std::ifstream f(path);
  if (!f) throw InvalidArgument("synthetic provider needs " + path.string());
  SynthOptions o;
  std::string key, kind;
  while (f >> key) {
    if (key == "frames") f >> o.n_frames;
    else if (key == "kind") f >> kind, o.kind = parse_trajectory_kind(kind);
    else if (key == "points") f >> o.n_points;
    else if (key == "noise") f >> o.noise_sigma;
    else if (key == "seed") f >> o.seed;
    else throw InvalidArgument(path.string() + ": unknown key '" + key + "'");
    if (!f) throw InvalidArgument(path.string() + ": bad value for " + key);
  }
  if (o.n_frames != dataset.n_frames) throw InvalidArgument(path.string() + ": frame count does not match dataset");
  return make_provider(make_synthetic_world(o), o);
}

}  // namespace ogs
