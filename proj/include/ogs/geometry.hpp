#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace ogs {

/// Rigid transform. Throughout the engine a camera pose is T_CW: it maps world
/// coordinates into the camera frame.
struct Pose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static Pose identity() { return {}; }

  Eigen::Vector3d apply(const Eigen::Vector3d& x) const { return rotation * x + translation; }
  Pose inverse() const;
  Eigen::Matrix4d matrix() const;
  /// Camera center in the source frame, i.e. -R^T t.
  Eigen::Vector3d center() const { return -rotation.transpose() * translation; }

  friend Pose operator*(const Pose& a, const Pose& b) {
    return {a.rotation * b.rotation, a.rotation * b.translation + a.translation};
  }
};

/// se(3) element. omega generates rotation (radians), nu generates translation.
struct Twist {
  Eigen::Vector3d omega = Eigen::Vector3d::Zero();
  Eigen::Vector3d nu = Eigen::Vector3d::Zero();

  Twist& operator+=(const Twist& o) {
    omega += o.omega;
    nu += o.nu;
    return *this;
  }
  friend Twist operator*(double s, const Twist& t) { return {s * t.omega, s * t.nu}; }
};

Eigen::Matrix3d skew(const Eigen::Vector3d& v);

Pose se3_exp(const Twist& xi);
/// Throws NearSingularity when the rotation angle is within 1e-6 of pi.
Twist se3_log(const Pose& pose);

/// Quaternion in (w, x, y, z) order; normalized internally.
Eigen::Matrix3d quat_to_rot(const Eigen::Vector4d& q);
/// Unit quaternion (w, x, y, z) with w >= 0.
Eigen::Vector4d rot_to_quat(const Eigen::Matrix3d& R);

/// Angle of R0^T R1 in degrees, from the trace formula with a clamped acos.
double rotation_angle_deg(const Eigen::Matrix3d& R0, const Eigen::Matrix3d& R1);

/// Nearest rotation in the Frobenius sense.
Eigen::Matrix3d orthonormalize(const Eigen::Matrix3d& M);

}  // namespace ogs
