#pragma once

// Synthetic scenes with exact geometry: textured planar rectangles in front
// of a large back plane, seeded camera trajectories, and analytic depth and
// optical flow for every frame pair.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "stvo/camera.hpp"
#include "stvo/frame_graph.hpp"
#include "stvo/lie.hpp"
#include "stvo/tensor.hpp"

namespace stvo {

enum class TrajectoryKind { kOrbit, kForward, kZigzag };

TrajectoryKind parse_trajectory_kind(const std::string& name);
std::string to_string(TrajectoryKind kind);

struct TrajectoryParams {
  double step_deg = 2.0;          // orbit angle / zigzag phase step per frame
  double step_length = 0.05;      // forward / zigzag advance per frame
  double orbit_radius = 4.0;      // orbit circle in the x-z plane around (0,0,radius)
  double jitter_translation = 0.002;
  double jitter_rotation_deg = 0.05;
  double frame_interval = 0.1;    // seconds between frames
  double start_time = 1.0;
};

// World-to-camera poses with timestamps. Orbit frames look at the circle
// center; forward and zigzag frames look down +z.
std::vector<StampedPose> generate_trajectory(TrajectoryKind kind, int n_frames,
                                             std::uint64_t seed,
                                             const TrajectoryParams& params = {});

// A textured rectangle: center + u * s + v * t for |s| <= half_u, |t| <= half_v.
struct ScenePlane {
  Vec3 center;
  Vec3 axis_u, axis_v;  // orthonormal
  double half_u = 1.0, half_v = 1.0;
  std::uint64_t texture_seed = 0;
  double texture_scale = 1.0;  // lattice cells per scene unit
};

struct Scene {
  std::vector<ScenePlane> planes;
  Camera camera;  // full-resolution intrinsics
  std::vector<StampedPose> trajectory;
};

struct SceneParams {
  int width = 512;
  int height = 384;
  double focal = 320.0;
  int min_planes = 3;
  int max_planes = 5;
  double back_plane_depth = 8.0;
};

Scene make_scene(std::uint64_t seed, std::vector<StampedPose> trajectory,
                 const SceneParams& params = {});

// Nearest positive ray hit among the planes for a camera-frame ray
// direction, as (camera z depth, plane index). Depth is +inf on a miss.
struct RayHit {
  double depth = 0.0;
  int plane = -1;
  Vec3 world;
};
RayHit cast_ray(const Scene& scene, const Pose& pose, const Vec3& ray_cam);

struct RenderedFrame {
  DenseArray image;  // [1,H,W] intensity in [0,1] at full resolution
  DenseArray depth;  // [h,w] camera-z depth at `geometry_camera` resolution
  Pose pose;
  double timestamp = 0.0;
};

// Intensity at the scene camera resolution and depth on the pixel centers of
// `geometry_camera` (normally the 1/8 camera).
RenderedFrame render(const Scene& scene, int frame, const Camera& geometry_camera);

struct FlowRaster {
  DenseArray flow;  // [2,h,w]
  DenseArray mask;  // [h,w]
};
// Ground-truth flow from frame i to frame j: each pixel's 3D surface point
// projected into camera j. Masked where behind camera j or out of frame.
FlowRaster render_flow(const Scene& scene, int frame_i, int frame_j,
                       const Camera& geometry_camera);

// Exports a TUM-RGB-D style directory:
//   rgb.txt, rgb/<t>.png, depth.txt, depth/<t>.dpr (DPR1 at 1/8 resolution),
//   groundtruth.txt (camera-to-world), calibration.txt ("fx fy cx cy").
void export_sequence(const Scene& scene, const std::filesystem::path& dir);

}  // namespace stvo
