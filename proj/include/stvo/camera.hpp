#pragma once

#include <Eigen/Core>

#include "stvo/lie.hpp"
#include "stvo/tensor.hpp"

namespace stvo {

// Pinhole intrinsics at the resolution the geometry runs at (1/8 of the
// input image inside the pipeline).
struct Camera {
  double fx = 1.0, fy = 1.0, cx = 0.0, cy = 0.0;
  int width = 1, height = 1;

  // Throws InvalidArgument unless fx, fy > 0 and the principal point lies in
  // the raster.
  void validate() const;
  // Intrinsics for an image downsampled by `factor` (pixel-center aligned,
  // as used for the 1/8 feature grid).
  Camera downsampled(int factor) const;
};

// Inverse depths on an H x W raster; every entry > 0 and finite.
class InverseDepthMap {
 public:
  InverseDepthMap() = default;
  explicit InverseDepthMap(DenseArray values);
  static InverseDepthMap constant(int height, int width, double value);

  int height() const { return values_.dim(0); }
  int width() const { return values_.dim(1); }
  double operator()(int y, int x) const { return values_(y, x); }
  double& operator()(int y, int x) { return values_(y, x); }
  const DenseArray& values() const { return values_; }
  DenseArray& values() { return values_; }
  double mean() const { return values_.sum() / static_cast<double>(values_.size()); }

  // Throws InvalidDepth if any entry is non-positive or non-finite.
  void validate() const;

 private:
  DenseArray values_;
};

// Minimum camera-frame z treated as in front of the camera.
inline constexpr double kMinDepth = 1e-8;

// (fx x / z + cx, fy y / z + cy); throws BehindCamera if z <= 1e-8.
Vec2 project(const Camera& cam, const Vec3& point_cam);
// Back-projects pixel `pixel` with inverse depth `inv_depth`.
Vec3 unproject(const Camera& cam, const Vec2& pixel, double inv_depth);

// Relative transform taking camera-i coordinates to camera-j coordinates
// for world-to-camera poses: g_j * g_i^-1.
inline Pose relative(const Pose& g_i, const Pose& g_j) { return g_j * g_i.inverse(); }

struct InducedFlow {
  DenseArray flow;  // [2,H,W], reprojection minus pixel
  DenseArray mask;  // [H,W], 1 where the point lands in front of camera j and inside the frame
};

// Reprojects every pixel of frame i into frame j through the current poses
// and inverse depths. Invalid pixels carry zero flow and mask 0.
InducedFlow induced_flow(const Pose& g_i, const Pose& g_j, const InverseDepthMap& d_i,
                         const Camera& cam);

// True when `pixel` lies in the closed pixel-center hull of the camera raster,
// up to 1e-9 px.
bool in_frame(const Camera& cam, const Vec2& pixel);

struct ReprojectionJacobians {
  Eigen::Matrix<double, 2, 6> d_pose_i;
  Eigen::Matrix<double, 2, 6> d_pose_j;
  Eigen::Vector2d d_inv_depth;
  Vec2 reprojection;
};

// Jacobians of the reprojection of `pixel` (inverse depth d) from frame i to
// frame j with respect to left perturbations exp(xi) * g of each pose and to
// d. Throws BehindCamera if the point is not in front of camera j.
ReprojectionJacobians reprojection_jacobians(const Pose& g_i, const Pose& g_j,
                                             double inv_depth, const Camera& cam,
                                             const Vec2& pixel);

}  // namespace stvo
