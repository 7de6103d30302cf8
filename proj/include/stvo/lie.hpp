#pragma once

// SO(3)/SE(3) in quaternion form.
//
// Conventions used throughout the project:
//   * Poses are world-to-camera: a world point X maps to camera coordinates
//     as g * X = R X + t.
//   * compose(a, b) = a * b applies b first, then a.
//   * Tangent vectors are (rho, omega): translational part first, then the
//     rotational part, and perturbations are left-multiplied: exp(xi) * g.

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace stvo {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Tangent = Eigen::Matrix<double, 6, 1>;

Mat3 skew(const Vec3& v);

// Unit quaternion, canonicalized to w >= 0.
class Rotation {
 public:
  Rotation() : q_(Eigen::Quaterniond::Identity()) {}
  // Normalizes and canonicalizes; throws InvalidArgument on a zero quaternion.
  static Rotation from_quaternion(double w, double x, double y, double z);
  static Rotation from_matrix(const Mat3& m);
  static Rotation from_axis_angle(const Vec3& axis, double angle);

  const Eigen::Quaterniond& quaternion() const { return q_; }
  double w() const { return q_.w(); }
  double x() const { return q_.x(); }
  double y() const { return q_.y(); }
  double z() const { return q_.z(); }

  Mat3 matrix() const { return q_.toRotationMatrix(); }
  Vec3 rotate(const Vec3& v) const { return q_ * v; }
  Rotation inverse() const;
  // Rotation angle in [0, pi].
  double angle() const;

  friend Rotation operator*(const Rotation& a, const Rotation& b);

 private:
  explicit Rotation(const Eigen::Quaterniond& q);
  Eigen::Quaterniond q_;
};

class Pose {
 public:
  Pose() : translation_(Vec3::Zero()) {}
  Pose(const Rotation& r, const Vec3& t) : rotation_(r), translation_(t) {}

  static Pose identity() { return Pose(); }

  const Rotation& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }

  Vec3 act(const Vec3& p) const { return rotation_.rotate(p) + translation_; }
  Pose inverse() const;
  Eigen::Matrix4d matrix() const;

  friend Pose operator*(const Pose& a, const Pose& b);

 private:
  Rotation rotation_;
  Vec3 translation_;
};

inline Pose compose(const Pose& a, const Pose& b) { return a * b; }

namespace lie {

// Below this rotation norm the closed forms switch to Taylor series.
inline constexpr double kSmallAngle = 1e-8;
// log() refuses rotations this close to pi.
inline constexpr double kNearPiMargin = 1e-6;

// SO(3) exponential of a rotation vector.
Rotation so3_exp(const Vec3& omega);
Vec3 so3_log(const Rotation& r);

// Exact SE(3) exponential (Rodrigues rotation + V-matrix coupling).
Pose exp(const Tangent& xi);
// Inverse of exp; throws AngleNearPi if the rotation angle >= pi - 1e-6.
Tangent log(const Pose& g);

// Left retraction exp(xi) * g.
inline Pose retract(const Tangent& xi, const Pose& g) { return exp(xi) * g; }

// Max entrywise difference of the 4x4 matrices.
double distance(const Pose& a, const Pose& b);

}  // namespace lie
}  // namespace stvo
