#include "selftest.hpp"

#include <cmath>
#include <random>

#include "stvo/camera.hpp"
#include "stvo/eval.hpp"
#include "stvo/lie.hpp"
#include "stvo/spatial.hpp"
#include "stvo/synth.hpp"

namespace stvo_tools {

using namespace stvo;

namespace {

bool report(std::ostream& os, const char* name, bool ok, double value) {
  os << (ok ? "PASS " : "FAIL ") << name << " (" << value << ")\n";
  return ok;
}

Tangent random_tangent(std::mt19937_64& rng, double rot_max) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Tangent xi;
  for (int k = 0; k < 3; ++k) xi[k] = 2.0 * u(rng);
  Vec3 w(u(rng), u(rng), u(rng));
  xi.tail<3>() = w.normalized() * rot_max * std::abs(u(rng));
  return xi;
}

double lie_round_trip(std::mt19937_64& rng) {
  double worst = 0.0;
  for (int k = 0; k < 10000; ++k) {
    const Tangent xi = random_tangent(rng, 3.0);
    worst = std::max(worst, (lie::log(lie::exp(xi)) - xi).norm());
  }
  return worst;
}

double umeyama_recovery(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<Vec3> a, b;
  const Pose g = lie::exp(random_tangent(rng, 2.0));
  const double s = 0.3 + std::abs(n(rng));
  for (int k = 0; k < 20; ++k) {
    a.emplace_back(n(rng), n(rng), n(rng));
    b.push_back(s * g.rotation().rotate(a.back()) + g.translation());
  }
  const Similarity sim = umeyama_align(a, b);
  return std::abs(sim.scale - s) + (sim.rotation - g.rotation().matrix()).norm() +
         (sim.translation - g.translation()).norm();
}

double sam_row_sum(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.5, 20.0);
  DenseArray depth({6, 8});
  for (double& v : depth.data()) v = u(rng);
  DenseArray wq({1, 4}), wk({1, 4});
  for (double& v : wq.data()) v = u(rng) / 20.0 - 0.5;
  for (double& v : wk.data()) v = u(rng) / 20.0 - 0.5;
  const DenseArray sam = build_sam(depth, wq, wk, DepthNormalization::kStandardized);
  double worst = 0.0;
  for (int i = 0; i < sam.dim(0); ++i) {
    double row = 0.0;
    for (int j = 0; j < sam.dim(1); ++j) row += sam(i, j);
    worst = std::max(worst, std::abs(row - 1.0));
  }
  return worst;
}

double flow_oracle() {
  const Scene scene = make_scene(3, generate_trajectory(TrajectoryKind::kOrbit, 4, 3));
  const Camera geo = scene.camera.downsampled(8);
  const RenderedFrame f0 = render(scene, 0, geo);
  DenseArray inv = f0.depth;
  for (double& v : inv.data()) v = 1.0 / v;
  const InducedFlow ind =
      induced_flow(f0.pose, scene.trajectory[3].pose, InverseDepthMap(inv), geo);
  const FlowRaster gt = render_flow(scene, 0, 3, geo);
  double worst = 0.0;
  for (int y = 0; y < geo.height; ++y) {
    for (int x = 0; x < geo.width; ++x) {
      if (gt.mask(y, x) == 0.0 || ind.mask(y, x) == 0.0) continue;
      for (int c = 0; c < 2; ++c) worst = std::max(worst, std::abs(gt.flow(c, y, x) - ind.flow(c, y, x)));
    }
  }
  return worst;
}

}  // namespace

bool run_selftest(std::ostream& os) {
  std::mt19937_64 rng(2024);
  bool ok = true;
  double v = lie_round_trip(rng);
  ok &= report(os, "se3 exp/log round trip", v < 1e-9, v);
  v = umeyama_recovery(rng);
  ok &= report(os, "umeyama similarity recovery", v < 1e-9, v);
  v = sam_row_sum(rng);
  ok &= report(os, "attention rows sum to one", v < 1e-10, v);
  v = flow_oracle();
  ok &= report(os, "rendered flow matches induced flow", v < 1e-6, v);
  return ok;
}

}  // namespace stvo_tools
