#pragma once

#include <cstddef>
#include <filesystem>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "stvo/frame_graph.hpp"

namespace stvo {

using Trajectory = std::vector<StampedPose>;

// TUM text format, one pose per line: "timestamp tx ty tz qx qy qz qw" with
// the camera-to-world transform; '#' starts a comment. In memory poses stay
// world-to-camera, so reading and writing invert.
Trajectory read_tum_trajectory(const std::filesystem::path& path);
void write_tum_trajectory(const std::filesystem::path& path, const Trajectory& traj);

// Camera centers (camera-to-world translations) in trajectory order.
std::vector<Vec3> camera_centers(const Trajectory& traj);

// Greedy one-to-one matching: all candidate pairs with |dt| <= max_dt are
// taken in ascending |dt| (ties: lower est index, then lower gt index).
// Returns (est index, gt index) pairs sorted by est index. Throws
// NoAssociations if nothing matches.
std::vector<std::pair<std::size_t, std::size_t>> associate(const Trajectory& est,
                                                           const Trajectory& gt,
                                                           double max_dt = 0.02);

struct Similarity {
  double scale = 1.0;
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  Vec3 apply(const Vec3& p) const { return scale * (rotation * p) + translation; }
};

// Least-squares s, R, t minimizing sum |gt - (s R est + t)|^2 with det R = +1.
// Throws DegenerateConfiguration with fewer than 3 pairs or collinear points.
Similarity umeyama_align(const std::vector<Vec3>& est, const std::vector<Vec3>& gt,
                         bool with_scale = true);

struct AteResult {
  double rmse = 0.0, mean = 0.0, median = 0.0, max = 0.0;
  std::size_t pairs = 0;
  Similarity alignment;
};

// Associates, aligns camera centers with scale, and reports translational
// residual statistics.
AteResult ate(const Trajectory& est, const Trajectory& gt, double max_dt = 0.02);

}  // namespace stvo
