#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "stvo/camera.hpp"
#include "stvo/error.hpp"
#include "stvo/lie.hpp"
#include "test_util.hpp"

using namespace stvo;

namespace {

Tangent random_tangent(std::mt19937_64& rng, double max_angle) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Tangent xi;
  for (int k = 0; k < 3; ++k) xi[k] = 3.0 * u(rng);
  Vec3 axis(u(rng), u(rng), u(rng));
  xi.tail<3>() = axis.normalized() * max_angle * std::abs(u(rng));
  return xi;
}

Pose random_pose(std::mt19937_64& rng) { return lie::exp(random_tangent(rng, 3.0)); }

Camera test_camera() { return Camera{50.0, 55.0, 15.5, 11.5, 32, 24}; }

}  // namespace

TEST_CASE("exp of zero is the identity") {
  const Pose g = lie::exp(Tangent::Zero());
  CHECK(lie::distance(g, Pose::identity()) == 0.0);
}

TEST_CASE("exp of a pure translation") {
  Tangent xi;
  xi << 1, 2, 3, 0, 0, 0;
  const Pose g = lie::exp(xi);
  CHECK(g.rotation().angle() == 0.0);
  CHECK((g.translation() - Vec3(1, 2, 3)).norm() < 1e-15);
}

TEST_CASE("exp of a quarter turn about z") {
  Tangent xi = Tangent::Zero();
  xi[5] = std::numbers::pi / 2;
  const Pose g = lie::exp(xi);
  const double c = std::cos(std::numbers::pi / 4), s = std::sin(std::numbers::pi / 4);
  CHECK(g.rotation().w() == doctest::Approx(c).epsilon(1e-15));
  CHECK(std::abs(g.rotation().x()) < 1e-15);
  CHECK(std::abs(g.rotation().y()) < 1e-15);
  CHECK(g.rotation().z() == doctest::Approx(s).epsilon(1e-15));
  CHECK(g.translation().norm() < 1e-15);
}

TEST_CASE("log examples") {
  CHECK(lie::log(Pose::identity()).norm() == 0.0);

  Tangent xi = Tangent::Constant(0.1);
  CHECK((lie::log(lie::exp(xi)) - xi).norm() < 1e-9);

  const double angle = std::numbers::pi - 1e-3;
  const Pose g(Rotation::from_axis_angle(Vec3::UnitZ(), angle), Vec3::Zero());
  const Tangent l = lie::log(g);
  CHECK(l.head<3>().norm() < 1e-12);
  CHECK((l.tail<3>() - Vec3(0, 0, angle)).norm() < 1e-9);
}

TEST_CASE("log refuses rotations at pi") {
  const Pose g(Rotation::from_axis_angle(Vec3::UnitX(), std::numbers::pi - 1e-7), Vec3::Zero());
  try {
    lie::log(g);
    FAIL("expected AngleNearPi");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kAngleNearPi);
  }
}

TEST_CASE("small-angle branches agree with the closed form") {
  std::mt19937_64 rng(5);
  for (double scale : {1e-12, 1e-9, 1e-7, 1e-5, 1e-3}) {
    Tangent xi = random_tangent(rng, 1.0);
    xi.tail<3>() = xi.tail<3>().normalized() * scale;
    CHECK((lie::log(lie::exp(xi)) - xi).norm() < 1e-12);
  }
}

TEST_CASE("exp/log round trip on 10^4 random tangents") {
  std::mt19937_64 rng(11);
  double worst = 0.0;
  for (int k = 0; k < 10000; ++k) {
    const Tangent xi = random_tangent(rng, std::numbers::pi - 1e-3);
    worst = std::max(worst, (lie::log(lie::exp(xi)) - xi).norm());
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("group axioms") {
  std::mt19937_64 rng(17);
  for (int k = 0; k < 200; ++k) {
    const Pose a = random_pose(rng), b = random_pose(rng), c = random_pose(rng);
    CHECK(lie::distance((a * b) * c, a * (b * c)) < 1e-12);
    CHECK(lie::distance(a * a.inverse(), Pose::identity()) < 1e-12);
    CHECK(lie::distance((a * b).inverse(), b.inverse() * a.inverse()) < 1e-12);
    CHECK(std::abs(a.rotation().quaternion().norm() - 1.0) < 1e-12);
    CHECK(a.rotation().w() >= 0.0);
  }
}

TEST_CASE("poses act world-to-camera and compose left to right") {
  std::mt19937_64 rng(19);
  const Pose a = random_pose(rng), b = random_pose(rng);
  const Vec3 x(0.3, -1.2, 2.0);
  CHECK(((a * b).act(x) - a.act(b.act(x))).norm() < 1e-12);
  CHECK((a.matrix() * x.homogeneous() - a.act(x).homogeneous()).norm() < 1e-12);
}

TEST_CASE("quaternions are canonicalized") {
  const Rotation r = Rotation::from_quaternion(-0.5, 0.5, -0.5, 0.5);
  CHECK(r.w() == doctest::Approx(0.5));
  CHECK(r.x() == doctest::Approx(-0.5));
  CHECK_THROWS_AS(Rotation::from_quaternion(0, 0, 0, 0), Error);
}

TEST_CASE("project examples") {
  const Camera unit{1.0, 1.0, 0.0, 0.0, 4, 4};
  CHECK((project(unit, Vec3(0, 0, 1)) - Vec2(0, 0)).norm() == 0.0);
  const Camera c100{100.0, 100.0, 50.0, 50.0, 200, 100};
  CHECK(project(c100, Vec3(1, 0, 2)).x() == doctest::Approx(100.0));

  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const Camera cam = test_camera();
  for (int k = 0; k < 100; ++k) {
    const Vec3 p(u(rng), u(rng), 1.5 + u(rng));
    const Vec2 px = project(cam, p);
    CHECK(px.x() == doctest::Approx(cam.fx * p.x() / p.z() + cam.cx).epsilon(1e-14));
    CHECK(px.y() == doctest::Approx(cam.fy * p.y() / p.z() + cam.cy).epsilon(1e-14));
  }
  try {
    project(cam, Vec3(0, 0, 1e-9));
    FAIL("expected BehindCamera");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kBehindCamera);
  }
}

TEST_CASE("unproject then project is the identity") {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Camera cam = test_camera();
  for (int k = 0; k < 200; ++k) {
    const Vec2 px(u(rng) * (cam.width - 1), u(rng) * (cam.height - 1));
    const double d = 0.05 + 10.0 * u(rng);
    CHECK((project(cam, unproject(cam, px, d)) - px).norm() < 1e-10);
  }
}

TEST_CASE("camera validation and downsampling") {
  CHECK_THROWS_AS((Camera{0.0, 1.0, 0.0, 0.0, 4, 4}.validate()), Error);
  CHECK_THROWS_AS((Camera{1.0, 1.0, 4.0, 0.0, 4, 4}.validate()), Error);
  const Camera full{320.0, 320.0, 255.5, 191.5, 512, 384};
  const Camera lo = full.downsampled(8);
  CHECK(lo.width == 64);
  CHECK(lo.height == 48);
  CHECK(lo.fx == doctest::Approx(40.0));
  // Pixel centers: full-res center 255.5 is the middle of the low-res grid.
  CHECK(lo.cx == doctest::Approx(31.5));
  CHECK(lo.cy == doctest::Approx(23.5));
}

TEST_CASE("induced flow under identity motion") {
  std::mt19937_64 rng(31);
  const Camera cam = test_camera();
  const InverseDepthMap d(testutil::random_array({cam.height, cam.width}, rng, 0.2, 2.0));
  const Pose g = random_pose(rng);
  const InducedFlow f = induced_flow(g, g, d, cam);
  CHECK(f.flow.max_abs() < 1e-12);
  CHECK(f.mask.sum() == doctest::Approx(cam.width * cam.height));
}

TEST_CASE("induced flow for forward motion is radial") {
  const Camera cam = test_camera();
  const double z = 4.0, tz = 0.5;
  const InverseDepthMap d = InverseDepthMap::constant(cam.height, cam.width, 1.0 / z);
  const Pose gj(Rotation(), Vec3(0, 0, -tz));
  const InducedFlow f = induced_flow(Pose::identity(), gj, d, cam);
  double worst = 0.0;
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      const double ex = (x - cam.cx) * tz / (z - tz);
      const double ey = (y - cam.cy) * tz / (z - tz);
      const bool inside = in_frame(cam, Vec2(x + ex, y + ey));
      CHECK((f.mask(y, x) == 1.0) == inside);
      if (!inside) continue;
      worst = std::max({worst, std::abs(f.flow(0, y, x) - ex), std::abs(f.flow(1, y, x) - ey)});
    }
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("induced flow masks points behind the target camera") {
  const Camera cam = test_camera();
  const InverseDepthMap d = InverseDepthMap::constant(cam.height, cam.width, 1.0);
  const Pose gj(Rotation(), Vec3(0, 0, -2.0));  // camera j passes the plane at z = 1
  const InducedFlow f = induced_flow(Pose::identity(), gj, d, cam);
  CHECK(f.mask.sum() == 0.0);
  CHECK(f.flow.max_abs() == 0.0);
}

TEST_CASE("reprojection Jacobian closed forms") {
  const Camera cam = test_camera();
  const double d = 0.7;
  const Vec2 axis(cam.cx, cam.cy);
  const ReprojectionJacobians j =
      reprojection_jacobians(Pose::identity(), Pose::identity(), d, cam, axis);
  CHECK(j.d_pose_j(0, 0) == doctest::Approx(cam.fx * d));
  CHECK(j.d_pose_j(1, 0) == doctest::Approx(0.0));
  CHECK(j.d_inv_depth.norm() < 1e-15);
  CHECK((j.reprojection - axis).norm() < 1e-12);
}

TEST_CASE("reprojection Jacobians match central differences") {
  std::mt19937_64 rng(37);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Camera cam = test_camera();
  const double h = 1e-6;
  for (int trial = 0; trial < 50; ++trial) {
    const Pose gi = lie::exp(random_tangent(rng, 0.3));
    Tangent rel = random_tangent(rng, 0.1);
    rel.head<3>() *= 0.05;
    const Pose gj = lie::exp(rel) * gi;
    const Vec2 px(2 + u(rng) * (cam.width - 5), 2 + u(rng) * (cam.height - 5));
    const double d = 0.3 + u(rng);
    const ReprojectionJacobians j = reprojection_jacobians(gi, gj, d, cam, px);
    const auto reproject = [&](const Pose& a, const Pose& b, double inv) {
      return project(cam, relative(a, b).act(unproject(cam, px, inv)));
    };
    Eigen::Matrix<double, 2, 6> ni, nj;
    for (int k = 0; k < 6; ++k) {
      const Tangent e = Tangent::Unit(k) * h;
      ni.col(k) = (reproject(lie::retract(e, gi), gj, d) - reproject(lie::retract(-e, gi), gj, d)) / (2 * h);
      nj.col(k) = (reproject(gi, lie::retract(e, gj), d) - reproject(gi, lie::retract(-e, gj), d)) / (2 * h);
    }
    const Vec2 nd = (reproject(gi, gj, d + h) - reproject(gi, gj, d - h)) / (2 * h);
    CHECK((j.d_pose_i - ni).norm() / std::max(1.0, ni.norm()) < 1e-4);
    CHECK((j.d_pose_j - nj).norm() / std::max(1.0, nj.norm()) < 1e-4);
    CHECK((j.d_inv_depth - nd).norm() / std::max(1e-3, nd.norm()) < 1e-4);
  }
}

TEST_CASE("inverse depth maps reject bad entries") {
  DenseArray v({2, 2}, 1.0);
  v(1, 1) = 0.0;
  CHECK_THROWS_AS(InverseDepthMap{v}.validate(), Error);
  v(1, 1) = std::nan("");
  CHECK_THROWS_AS(InverseDepthMap{v}.validate(), Error);
  CHECK_THROWS_AS(InverseDepthMap{DenseArray({4})}, Error);
}
