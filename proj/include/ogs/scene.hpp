#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace ogs {

/// The optimizable parameters of one Gaussian. Also used as the shape of
/// gradient and optimizer-moment buffers.
struct GaussianParams {
  static constexpr int kSize = 14;

  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  Eigen::Vector4d rot = Eigen::Vector4d(1.0, 0.0, 0.0, 0.0);  // (w, x, y, z)
  Eigen::Vector3d log_scale = Eigen::Vector3d::Zero();
  double opacity_logit = 0.0;
  Eigen::Vector3d color = Eigen::Vector3d::Zero();

  static GaussianParams zeros();
  bool all_finite() const;
  GaussianParams& operator+=(const GaussianParams& o);
};

struct Gaussian3D : GaussianParams {
  int created_at = 0;

  double opacity() const;
  Eigen::Vector3d scale() const;
  Eigen::Matrix3d covariance() const;
};

double sigmoid(double x);
double logit(double p);

/// Sigma = R S S^T R^T with S = diag(exp(log_scale)).
Eigen::Matrix3d covariance_from_params(const Eigen::Vector4d& rot, const Eigen::Vector3d& log_scale);

/// Unnormalized density exp(-0.5 (x-mu)^T Sigma^-1 (x-mu)).
double eval_gaussian(const Gaussian3D& g, const Eigen::Vector3d& x);

struct InsertResult {
  std::size_t inserted = 0;
  std::size_t skipped = 0;  // non-finite input points
};

/// Scale limits for freshly inserted Gaussians, in scene units.
inline constexpr double kMinInitScale = 1e-4;
inline constexpr double kMaxInitScale = 1.0;
inline constexpr double kIsolatedPointScale = 0.01;

/// The Gaussian scene plus its gradient and adaptive-moment buffers. Every
/// mutation of Gaussian parameters bumps revision(), which lets render
/// outputs detect that they went stale.
class GaussianMap {
 public:
  std::size_t size() const { return gaussians_.size(); }
  bool empty() const { return gaussians_.empty(); }
  const std::vector<Gaussian3D>& gaussians() const { return gaussians_; }
  const Gaussian3D& operator[](std::size_t i) const { return gaussians_[i]; }
  std::uint64_t revision() const { return revision_; }

  void add(const Gaussian3D& g);
  /// Mutable access for optimizers and tests; counts as a mutation.
  Gaussian3D& mutable_gaussian(std::size_t i);
  std::vector<Gaussian3D>& mutable_gaussians();

  std::vector<GaussianParams>& grads() { return grads_; }
  const std::vector<GaussianParams>& grads() const { return grads_; }
  void zero_grad();

  std::vector<GaussianParams>& first_moments() { return moment1_; }
  std::vector<GaussianParams>& second_moments() { return moment2_; }
  std::vector<std::uint32_t>& adam_steps() { return steps_; }

  /// Inserts one isotropic Gaussian per finite point. Scale is the mean
  /// distance to the (up to) 3 nearest points of the same batch.
  InsertResult insert_from_points(std::span<const Eigen::Vector3d> points,
                                  std::span<const Eigen::Vector3d> colors, int keyframe_idx);

  /// Removes low-opacity Gaussians older than the grace period.
  std::size_t prune(int current_kf, double min_opacity = 0.05, int min_age = 3);

  /// Removes Gaussians for which pred(g) is true, compacting all buffers.
  std::size_t remove_if(const std::function<bool(const Gaussian3D&)>& pred);

  /// Drops any Gaussian with a non-finite parameter.
  std::size_t drop_non_finite();

 private:
  std::vector<Gaussian3D> gaussians_;
  std::vector<GaussianParams> grads_;
  std::vector<GaussianParams> moment1_;
  std::vector<GaussianParams> moment2_;
  std::vector<std::uint32_t> steps_;
  std::uint64_t revision_ = 0;
};

/// For each point, the mean distance to its k nearest neighbours among the
/// others (fewer if the set is small; 0 if it has no other point).
std::vector<double> mean_knn_distance(std::span<const Eigen::Vector3d> points, int k = 3);

/// "OGSM" map snapshot.
void save_map(const GaussianMap& map, const std::filesystem::path& path);
GaussianMap load_map(const std::filesystem::path& path);

}  // namespace ogs
