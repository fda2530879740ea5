#include "ogs/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/SVD>

#include "ogs/errors.hpp"

namespace ogs {

namespace {

constexpr double kSmallAngle = 1e-8;

bool all_finite(const Twist& xi) { return xi.omega.allFinite() && xi.nu.allFinite(); }

Eigen::Vector3d vee(const Eigen::Matrix3d& m) { return {m(2, 1), m(0, 2), m(1, 0)}; }

}  // namespace

Pose Pose::inverse() const {
  const Eigen::Matrix3d rt = rotation.transpose();
  return {rt, -rt * translation};
}

Eigen::Matrix4d Pose::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation;
  m.topRightCorner<3, 1>() = translation;
  return m;
}

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

Pose se3_exp(const Twist& xi) {
  if (!all_finite(xi)) throw InvalidArgument("se3_exp: non-finite twist");
  const double theta2 = xi.omega.squaredNorm();
  const double theta = std::sqrt(theta2);
  double a, b, c;
  if (theta < kSmallAngle) {
    a = 1.0 - theta2 / 6.0;
    b = 0.5 - theta2 / 24.0;
    c = 1.0 / 6.0 - theta2 / 120.0;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta2;
    c = (theta - std::sin(theta)) / (theta2 * theta);
  }
  const Eigen::Matrix3d W = skew(xi.omega);
  const Eigen::Matrix3d W2 = W * W;
  const Eigen::Matrix3d I = Eigen::Matrix3d::Identity();
  Pose out;
  out.rotation = I + a * W + b * W2;
  out.translation = (I + b * W + c * W2) * xi.nu;
  return out;
}

Twist se3_log(const Pose& pose) {
  const Eigen::Matrix3d& R = pose.rotation;
  const Eigen::Vector3d axis_sin = 0.5 * vee(R - R.transpose());
  const double cos_theta = std::clamp(0.5 * (R.trace() - 1.0), -1.0, 1.0);
  const double theta = std::atan2(axis_sin.norm(), cos_theta);
  if (theta >= std::numbers::pi - 1e-6) {
    throw NearSingularity("se3_log: rotation angle too close to pi");
  }
  const double theta2 = theta * theta;
  Twist xi;
  double d;
  if (theta < kSmallAngle) {
    xi.omega = (1.0 + theta2 / 6.0) * axis_sin;
    d = 1.0 / 12.0 + theta2 / 720.0;
  } else {
    xi.omega = theta / std::sin(theta) * axis_sin;
    const double a = std::sin(theta) / theta;
    const double b = (1.0 - std::cos(theta)) / theta2;
    d = (1.0 - a / (2.0 * b)) / theta2;
  }
  const Eigen::Matrix3d W = skew(xi.omega);
  const Eigen::Matrix3d V_inv = Eigen::Matrix3d::Identity() - 0.5 * W + d * W * W;
  xi.nu = V_inv * pose.translation;
  return xi;
}

Eigen::Matrix3d quat_to_rot(const Eigen::Vector4d& q) {
  const double n = q.norm();
  if (!(n > 1e-12) || !q.allFinite()) throw InvalidArgument("quat_to_rot: quaternion norm too small");
  const double w = q[0] / n, x = q[1] / n, y = q[2] / n, z = q[3] / n;
  Eigen::Matrix3d R;
  R << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
       2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
       2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return R;
}

Eigen::Vector4d rot_to_quat(const Eigen::Matrix3d& R) {
  Eigen::Quaterniond q(R);
  q.normalize();
  Eigen::Vector4d out(q.w(), q.x(), q.y(), q.z());
  if (out[0] < 0) out = -out;
  return out;
}

double rotation_angle_deg(const Eigen::Matrix3d& R0, const Eigen::Matrix3d& R1) {
  for (const Eigen::Matrix3d* R : {&R0, &R1}) {
    for (int r = 0; r < 3; ++r) {
      if (!(std::abs(R->row(r).norm() - 1.0) <= 1e-6)) {
        throw InvalidArgument("rotation_angle_deg: input is not orthonormal");
      }
    }
  }
  // trace(R0^T R1) as an elementwise product sum; symmetric in its arguments.
  const double trace = (R0.array() * R1.array()).sum();
  const double c = std::clamp(0.5 * (trace - 1.0), -1.0, 1.0);
  return std::acos(c) * 180.0 / std::numbers::pi;
}

Eigen::Matrix3d orthonormalize(const Eigen::Matrix3d& M) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d R = svd.matrixU() * svd.matrixV().transpose();
  if (R.determinant() < 0) {
    Eigen::Matrix3d U = svd.matrixU();
    U.col(2) *= -1.0;
    R = U * svd.matrixV().transpose();
  }
  return R;
}

}  // namespace ogs
