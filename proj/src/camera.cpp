#include "stvo/camera.hpp"

#include <cmath>

#include "stvo/error.hpp"

namespace stvo {

void Camera::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "focal lengths must be positive");
  }
  if (width < 1 || height < 1) throw Error(ErrorCode::kInvalidArgument, "empty camera raster");
  if (!(cx >= 0.0 && cx < width && cy >= 0.0 && cy < height)) {
    throw Error(ErrorCode::kInvalidArgument, "principal point outside the raster");
  }
}

Camera Camera::downsampled(int factor) const {
  if (factor < 1 || width % factor != 0 || height % factor != 0) {
    throw Error(ErrorCode::kBadDimensions,
                "image " + std::to_string(width) + "x" + std::to_string(height) +
                    " not divisible by " + std::to_string(factor));
  }
  const double f = factor;
  Camera c;
  c.fx = fx / f;
  c.fy = fy / f;
  // Low-res pixel k covers high-res pixels [f k, f k + f): centers map as
  // u_hi = f u_lo + (f - 1) / 2.
  c.cx = (cx - 0.5 * (f - 1.0)) / f;
  c.cy = (cy - 0.5 * (f - 1.0)) / f;
  c.width = width / factor;
  c.height = height / factor;
  return c;
}

InverseDepthMap::InverseDepthMap(DenseArray values) : values_(std::move(values)) {
  if (values_.rank() != 2) {
    throw Error(ErrorCode::kShapeMismatch, "inverse depth map must be [H,W]");
  }
}

InverseDepthMap InverseDepthMap::constant(int height, int width, double value) {
  return InverseDepthMap(DenseArray({height, width}, value));
}

void InverseDepthMap::validate() const {
  for (double v : values_.data()) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw Error(ErrorCode::kInvalidDepth, "inverse depth " + std::to_string(v));
    }
  }
}

Vec2 project(const Camera& cam, const Vec3& p) {
  if (p.z() <= kMinDepth) {
    throw Error(ErrorCode::kBehindCamera, "z = " + std::to_string(p.z()));
  }
  return {cam.fx * p.x() / p.z() + cam.cx, cam.fy * p.y() / p.z() + cam.cy};
}

Vec3 unproject(const Camera& cam, const Vec2& pixel, double inv_depth) {
  const Vec3 ray((pixel.x() - cam.cx) / cam.fx, (pixel.y() - cam.cy) / cam.fy, 1.0);
  return ray / inv_depth;
}

bool in_frame(const Camera& cam, const Vec2& p) {
  constexpr double tol = 1e-9;  // absorbs round-off on the border
  return p.x() >= -tol && p.x() <= cam.width - 1 + tol && p.y() >= -tol &&
         p.y() <= cam.height - 1 + tol;
}

InducedFlow induced_flow(const Pose& g_i, const Pose& g_j, const InverseDepthMap& d_i,
                         const Camera& cam) {
  const int h = cam.height, w = cam.width;
  if (d_i.height() != h || d_i.width() != w) {
    throw Error(ErrorCode::kShapeMismatch, "inverse depth map does not match camera");
  }
  const Pose g_ji = relative(g_i, g_j);
  const Mat3 R = g_ji.rotation().matrix();
  const Vec3 t = g_ji.translation();
  InducedFlow out{DenseArray({2, h, w}), DenseArray({h, w})};
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Vec3 Xj = R * unproject(cam, Vec2(x, y), d_i(y, x)) + t;
      if (Xj.z() <= kMinDepth) continue;
      const Vec2 p(cam.fx * Xj.x() / Xj.z() + cam.cx, cam.fy * Xj.y() / Xj.z() + cam.cy);
      if (!in_frame(cam, p)) continue;
      out.flow(0, y, x) = p.x() - x;
      out.flow(1, y, x) = p.y() - y;
      out.mask(y, x) = 1.0;
    }
  }
  return out;
}

ReprojectionJacobians reprojection_jacobians(const Pose& g_i, const Pose& g_j,
                                             double inv_depth, const Camera& cam,
                                             const Vec2& pixel) {
  const Pose g_ji = relative(g_i, g_j);
  const Mat3 R = g_ji.rotation().matrix();
  const Vec3 Xi = unproject(cam, pixel, inv_depth);
  const Vec3 Xj = R * Xi + g_ji.translation();
  if (Xj.z() <= kMinDepth) {
    throw Error(ErrorCode::kBehindCamera, "reprojection behind camera j");
  }
  const double iz = 1.0 / Xj.z();
  Eigen::Matrix<double, 2, 3> Jp;
  Jp << cam.fx * iz, 0.0, -cam.fx * Xj.x() * iz * iz,  //
      0.0, cam.fy * iz, -cam.fy * Xj.y() * iz * iz;

  Eigen::Matrix<double, 3, 6> dXj_dxj;
  dXj_dxj << Mat3::Identity(), -skew(Xj);
  Eigen::Matrix<double, 3, 6> dXi_dxi;
  dXi_dxi << Mat3::Identity(), -skew(Xi);

  ReprojectionJacobians J;
  J.d_pose_j = Jp * dXj_dxj;
  J.d_pose_i = -Jp * R * dXi_dxi;
  J.d_inv_depth = Jp * (-R * Xi / inv_depth);
  J.reprojection = Vec2(cam.fx * Xj.x() * iz + cam.cx, cam.fy * Xj.y() * iz + cam.cy);
  return J;
}

}  // namespace stvo
