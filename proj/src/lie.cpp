#include "stvo/lie.hpp"

#include <cmath>
#include <numbers>

#include "stvo/error.hpp"

namespace stvo {

Mat3 skew(const Vec3& v) {
  Mat3 s;
  // clang-format off
  s <<     0.0, -v.z(),  v.y(),
         v.z(),    0.0, -v.x(),
        -v.y(),  v.x(),    0.0;
  // clang-format on
  return s;
}

Rotation::Rotation(const Eigen::Quaterniond& q) : q_(q) {
  q_.normalize();
  if (q_.w() < 0.0) q_.coeffs() = -q_.coeffs();
}

Rotation Rotation::from_quaternion(double w, double x, double y, double z) {
  const double n = std::sqrt(w * w + x * x + y * y + z * z);
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw Error(ErrorCode::kInvalidArgument, "degenerate quaternion");
  }
  return Rotation(Eigen::Quaterniond(w, x, y, z));
}

Rotation Rotation::from_matrix(const Mat3& m) { return Rotation(Eigen::Quaterniond(m)); }

Rotation Rotation::from_axis_angle(const Vec3& axis, double angle) {
  return lie::so3_exp(axis.normalized() * angle);
}

Rotation Rotation::inverse() const { return Rotation(q_.conjugate()); }

double Rotation::angle() const {
  return 2.0 * std::atan2(q_.vec().norm(), std::abs(q_.w()));
}

Rotation operator*(const Rotation& a, const Rotation& b) { return Rotation(a.q_ * b.q_); }

Pose Pose::inverse() const {
  const Rotation r = rotation_.inverse();
  return Pose(r, -r.rotate(translation_));
}

Eigen::Matrix4d Pose::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation_.matrix();
  m.topRightCorner<3, 1>() = translation_;
  return m;
}

Pose operator*(const Pose& a, const Pose& b) {
  return Pose(a.rotation_ * b.rotation_, a.rotation_.rotate(b.translation_) + a.translation_);
}

namespace lie {

Rotation so3_exp(const Vec3& omega) {
  const double theta = omega.norm();
  double w, s;
  if (theta < kSmallAngle) {
    const double t2 = theta * theta;
    w = 1.0 - t2 / 8.0;
    s = 0.5 - t2 / 48.0;
  } else {
    w = std::cos(0.5 * theta);
    s = std::sin(0.5 * theta) / theta;
  }
  return Rotation::from_quaternion(w, s * omega.x(), s * omega.y(), s * omega.z());
}

Vec3 so3_log(const Rotation& r) {
  const Eigen::Quaterniond& q = r.quaternion();
  const Vec3 v = q.vec();
  const double n = v.norm();
  const double w = q.w();  // >= 0 by canonicalization
  if (n < kSmallAngle) {
    // theta ~ 2n, omega = 2 v / w * (1 - n^2 / (3 w^2))
    return (2.0 / w) * (1.0 - n * n / (3.0 * w * w)) * v;
  }
  const double theta = 2.0 * std::atan2(n, w);
  return (theta / n) * v;
}

Pose exp(const Tangent& xi) {
  const Vec3 rho = xi.head<3>();
  const Vec3 omega = xi.tail<3>();
  const double theta = omega.norm();
  const Mat3 W = skew(omega);
  const Mat3 W2 = W * W;
  Mat3 V;
  if (theta < kSmallAngle) {
    V = Mat3::Identity() + 0.5 * W + W2 / 6.0;
  } else {
    const double t2 = theta * theta;
    const double sh = std::sin(0.5 * theta);
    V = Mat3::Identity() + (2.0 * sh * sh / t2) * W +
        ((theta - std::sin(theta)) / (t2 * theta)) * W2;
  }
  return Pose(so3_exp(omega), V * rho);
}

Tangent log(const Pose& g) {
  const double theta = g.rotation().angle();
  if (theta >= std::numbers::pi - kNearPiMargin) {
    throw Error(ErrorCode::kAngleNearPi, "rotation angle " + std::to_string(theta));
  }
  const Vec3 omega = so3_log(g.rotation());
  const Mat3 W = skew(omega);
  const Mat3 W2 = W * W;
  Mat3 V_inv;
  if (theta < kSmallAngle) {
    V_inv = Mat3::Identity() - 0.5 * W + W2 / 12.0;
  } else {
    // (1 - (theta/2) cot(theta/2)) / theta^2, cancellation-free form
    const double half = 0.5 * theta;
    const double coef = (1.0 - half * std::cos(half) / std::sin(half)) / (theta * theta);
    V_inv = Mat3::Identity() - 0.5 * W + coef * W2;
  }
  Tangent xi;
  xi.head<3>() = V_inv * g.translation();
  xi.tail<3>() = omega;
  return xi;
}

double distance(const Pose& a, const Pose& b) {
  return (a.matrix() - b.matrix()).cwiseAbs().maxCoeff();
}

}  // namespace lie
}  // namespace stvo
