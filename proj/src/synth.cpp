#include "stvo/synth.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>

#include "stvo/error.hpp"
#include "stvo/eval.hpp"
#include "stvo/image_io.hpp"
#include "stvo/spatial.hpp"

namespace stvo {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

double lattice(std::uint64_t seed, std::int64_t i, std::int64_t j) {
  const std::uint64_t h = splitmix(seed ^ splitmix(static_cast<std::uint64_t>(i) * 0x632BE59BD9B4E019ull +
                                                   static_cast<std::uint64_t>(j)));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double smooth(double t) { return t * t * (3.0 - 2.0 * t); }

// Multi-octave value noise in [0,1].
double value_noise(std::uint64_t seed, double u, double v) {
  double acc = 0.0, amp = 0.5, norm = 0.0, freq = 1.0;
  for (int octave = 0; octave < 4; ++octave) {
    const double x = u * freq, y = v * freq;
    const double fx = std::floor(x), fy = std::floor(y);
    const auto i = static_cast<std::int64_t>(fx), j = static_cast<std::int64_t>(fy);
    const double tx = smooth(x - fx), ty = smooth(y - fy);
    const std::uint64_t s = seed + 0x1000193ull * octave;
    const double a = lattice(s, i, j), b = lattice(s, i + 1, j);
    const double c = lattice(s, i, j + 1), d = lattice(s, i + 1, j + 1);
    acc += amp * ((a * (1 - tx) + b * tx) * (1 - ty) + (c * (1 - tx) + d * tx) * ty);
    norm += amp;
    amp *= 0.5;
    freq *= 2.0;
  }
  return acc / norm;
}

// World-to-camera pose of a camera at `center` looking at `target`, image y
// pointing towards world +y.
Pose look_at(const Vec3& center, const Vec3& target) {
  const Vec3 f = (target - center).normalized();
  const Vec3 x = Vec3::UnitY().cross(f).normalized();
  const Vec3 y = f.cross(x);
  Mat3 c2w;
  c2w << x, y, f;
  const Rotation r = Rotation::from_matrix(c2w.transpose());
  return Pose(r, -(r.rotate(center)));
}

// Applies a camera-frame rotation and world-frame center offset.
Pose jitter(const Pose& g, const Vec3& dc, const Vec3& dtheta) {
  const Pose c2w = g.inverse();
  const Rotation r = c2w.rotation() * lie::so3_exp(dtheta);
  return Pose(r, c2w.translation() + dc).inverse();
}

Vec3 ray_for(const Camera& cam, int x, int y) {
  return Vec3((x - cam.cx) / cam.fx, (y - cam.cy) / cam.fy, 1.0);
}

std::string stamp_name(double t) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", t);
  return buf;
}

}  // namespace

TrajectoryKind parse_trajectory_kind(const std::string& name) {
  if (name == "orbit") return TrajectoryKind::kOrbit;
  if (name == "forward") return TrajectoryKind::kForward;
  if (name == "zigzag") return TrajectoryKind::kZigzag;
  throw Error(ErrorCode::kInvalidArgument, "unknown trajectory kind '" + name + "'");
}

std::string to_string(TrajectoryKind kind) {
  switch (kind) {
    case TrajectoryKind::kOrbit: return "orbit";
    case TrajectoryKind::kForward: return "forward";
    case TrajectoryKind::kZigzag: return "zigzag";
  }
  return "?";
}

std::vector<StampedPose> generate_trajectory(TrajectoryKind kind, int n_frames,
                                             std::uint64_t seed, const TrajectoryParams& p) {
  if (n_frames < 1) throw Error(ErrorCode::kInvalidArgument, "n_frames must be >= 1");
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    0x74726a00u + static_cast<std::uint32_t>(kind)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<StampedPose> out;
  for (int k = 0; k < n_frames; ++k) {
    Pose g;
    switch (kind) {
      case TrajectoryKind::kOrbit: {
        const double a = k * p.step_deg * kDeg, r = p.orbit_radius;
        g = look_at(Vec3(r * std::sin(a), 0.0, r * (1.0 - std::cos(a))), Vec3(0.0, 0.0, r));
        break;
      }
      case TrajectoryKind::kForward:
        g = Pose(Rotation(), Vec3(0.0, 0.0, -k * p.step_length));
        break;
      case TrajectoryKind::kZigzag: {
        const double phase = k * p.step_deg * 10.0 * kDeg;
        const Vec3 c(0.2 * std::sin(phase), 0.0, k * p.step_length);
        g = look_at(c, c + Vec3(std::sin(3.0 * kDeg * std::cos(phase)), 0.0, 1.0));
        break;
      }
    }
    Vec3 dc(gauss(rng), gauss(rng), gauss(rng));
    Vec3 dr(gauss(rng), gauss(rng), gauss(rng));
    if (k > 0) g = jitter(g, dc * p.jitter_translation, dr * (p.jitter_rotation_deg * kDeg));
    out.push_back({p.start_time + k * p.frame_interval, g});
  }
  return out;
}

Scene make_scene(std::uint64_t seed, std::vector<StampedPose> trajectory,
                 const SceneParams& params) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    0x7363656eu};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  Scene scene;
  scene.camera.fx = scene.camera.fy = params.focal;
  scene.camera.width = params.width;
  scene.camera.height = params.height;
  scene.camera.cx = 0.5 * (params.width - 1);
  scene.camera.cy = 0.5 * (params.height - 1);
  scene.camera.validate();
  scene.trajectory = std::move(trajectory);

  ScenePlane back;
  back.center = Vec3(0.0, 0.0, params.back_plane_depth);
  back.axis_u = Vec3::UnitX();
  back.axis_v = Vec3::UnitY();
  back.half_u = back.half_v = 60.0;
  back.texture_seed = rng();
  back.texture_scale = 1.5;
  scene.planes.push_back(back);

  const int n = params.min_planes +
                static_cast<int>(rng() % static_cast<std::uint64_t>(
                                             params.max_planes - params.min_planes + 1));
  for (int k = 0; k < n; ++k) {
    ScenePlane pl;
    pl.center = Vec3(uniform(-1.5, 1.5), uniform(-1.0, 1.0), uniform(2.5, 6.0));
    const Rotation tilt = lie::so3_exp(Vec3(uniform(-0.5, 0.5), uniform(-0.5, 0.5), uniform(-0.3, 0.3)));
    pl.axis_u = tilt.rotate(Vec3::UnitX());
    pl.axis_v = tilt.rotate(Vec3::UnitY());
    pl.half_u = uniform(0.4, 1.0);
    pl.half_v = uniform(0.4, 1.0);
    pl.texture_seed = rng();
    pl.texture_scale = uniform(3.0, 5.0);
    scene.planes.push_back(pl);
  }
  return scene;
}

RayHit cast_ray(const Scene& scene, const Pose& pose, const Vec3& ray_cam) {
  const Pose c2w = pose.inverse();
  const Vec3 origin = c2w.translation();
  const Vec3 dir = c2w.rotation().rotate(ray_cam);
  RayHit best;
  best.depth = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < scene.planes.size(); ++k) {
    const ScenePlane& pl = scene.planes[k];
    const Vec3 normal = pl.axis_u.cross(pl.axis_v);
    const double denom = normal.dot(dir);
    if (std::abs(denom) < 1e-12) continue;
    // ray_cam has unit z, so the ray parameter is the camera-frame depth.
    const double s = normal.dot(pl.center - origin) / denom;
    if (!(s > 1e-6) || s >= best.depth) continue;
    const Vec3 local = origin + s * dir - pl.center;
    if (std::abs(local.dot(pl.axis_u)) > pl.half_u || std::abs(local.dot(pl.axis_v)) > pl.half_v) {
      continue;
    }
    best.depth = s;
    best.plane = static_cast<int>(k);
    best.world = origin + s * dir;
  }
  return best;
}

RenderedFrame render(const Scene& scene, int frame, const Camera& gcam) {
  const StampedPose& sp = scene.trajectory.at(frame);
  const Camera& cam = scene.camera;
  RenderedFrame out;
  out.pose = sp.pose;
  out.timestamp = sp.timestamp;
  out.image = DenseArray({1, cam.height, cam.width});
  out.depth = DenseArray({gcam.height, gcam.width});
  bool missed = false;
#pragma omp parallel for schedule(static) reduction(|| : missed)
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      const RayHit hit = cast_ray(scene, sp.pose, ray_for(cam, x, y));
      if (hit.plane < 0) {
        missed = true;
        continue;
      }
      const ScenePlane& pl = scene.planes[hit.plane];
      const Vec3 local = hit.world - pl.center;
      const double u = local.dot(pl.axis_u) * pl.texture_scale;
      const double v = local.dot(pl.axis_v) * pl.texture_scale;
      const double shade = 0.15 + 0.1 * static_cast<double>(hit.plane % 4);
      out.image(0, y, x) = std::min(1.0, shade + 0.6 * value_noise(pl.texture_seed, u, v));
    }
  }
#pragma omp parallel for schedule(static) reduction(|| : missed)
  for (int y = 0; y < gcam.height; ++y) {
    for (int x = 0; x < gcam.width; ++x) {
      const RayHit hit = cast_ray(scene, sp.pose, ray_for(gcam, x, y));
      if (hit.plane < 0) {
        missed = true;
        continue;
      }
      out.depth(y, x) = hit.depth;
    }
  }
  if (missed) {
    throw Error(ErrorCode::kInvalidArgument,
                "scene does not cover the view of frame " + std::to_string(frame));
  }
  return out;
}

FlowRaster render_flow(const Scene& scene, int frame_i, int frame_j, const Camera& gcam) {
  const Pose& gi = scene.trajectory.at(frame_i).pose;
  const Pose& gj = scene.trajectory.at(frame_j).pose;
  FlowRaster out{DenseArray({2, gcam.height, gcam.width}), DenseArray({gcam.height, gcam.width})};
#pragma omp parallel for schedule(static)
  for (int y = 0; y < gcam.height; ++y) {
    for (int x = 0; x < gcam.width; ++x) {
      const RayHit hit = cast_ray(scene, gi, ray_for(gcam, x, y));
      if (hit.plane < 0) continue;
      const Vec3 pj = gj.act(hit.world);
      if (pj.z() <= kMinDepth) continue;
      const Vec2 q(gcam.fx * pj.x() / pj.z() + gcam.cx, gcam.fy * pj.y() / pj.z() + gcam.cy);
      if (!in_frame(gcam, q)) continue;
      out.flow(0, y, x) = q.x() - x;
      out.flow(1, y, x) = q.y() - y;
      out.mask(y, x) = 1.0;
    }
  }
  return out;
}

void export_sequence(const Scene& scene, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "rgb");
  fs::create_directories(dir / "depth");
  const Camera gcam = scene.camera.downsampled(8);

  std::ofstream rgb(dir / "rgb.txt"), depth(dir / "depth.txt");
  if (!rgb || !depth) throw Error(ErrorCode::kMalformedFile, "cannot write index in " + dir.string());
  rgb << "# color images\n# timestamp filename\n";
  depth << "# depth maps (DPR1, 1/8 resolution)\n# timestamp filename\n";
  for (std::size_t k = 0; k < scene.trajectory.size(); ++k) {
    const RenderedFrame f = render(scene, static_cast<int>(k), gcam);
    const std::string name = stamp_name(f.timestamp);
    write_png(dir / "rgb" / (name + ".png"), f.image);
    write_depth_file(dir / "depth" / (name + ".dpr"), f.depth);
    rgb << name << " rgb/" << name << ".png\n";
    depth << name << " depth/" << name << ".dpr\n";
  }
  write_tum_trajectory(dir / "groundtruth.txt", scene.trajectory);

  std::ofstream calib(dir / "calibration.txt");
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%.9g %.9g %.9g %.9g\n", scene.camera.fx, scene.camera.fy,
                scene.camera.cx, scene.camera.cy);
  calib << buf;
  if (!calib) throw Error(ErrorCode::kMalformedFile, "cannot write calibration");
}

}  // namespace stvo
