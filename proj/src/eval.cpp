#include "stvo/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <tuple>

#include <Eigen/SVD>

#include "stvo/error.hpp"

namespace stvo {

Trajectory read_tum_trajectory(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::kMalformedFile, "cannot read " + path.string());
  Trajectory traj;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ss(line);
    double t, tx, ty, tz, qx, qy, qz, qw;
    if (!(ss >> t >> tx >> ty >> tz >> qx >> qy >> qz >> qw)) {
      throw Error(ErrorCode::kMalformedFile,
                  path.string() + ":" + std::to_string(line_no) + ": expected 8 numbers");
    }
    if (!traj.empty() && !(t > traj.back().timestamp)) {
      throw Error(ErrorCode::kMalformedFile,
                  path.string() + ":" + std::to_string(line_no) + ": timestamps must increase");
    }
    const Pose cam_to_world(Rotation::from_quaternion(qw, qx, qy, qz), Vec3(tx, ty, tz));
    traj.push_back({t, cam_to_world.inverse()});
  }
  return traj;
}

void write_tum_trajectory(const std::filesystem::path& path, const Trajectory& traj) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::kMalformedFile, "cannot write " + path.string());
  os << "# timestamp tx ty tz qx qy qz qw\n";
  char buf[256];
  for (const StampedPose& sp : traj) {
    const Pose c2w = sp.pose.inverse();
    const Vec3& t = c2w.translation();
    const Rotation& q = c2w.rotation();
    std::snprintf(buf, sizeof(buf), "%.6f %.9f %.9f %.9f %.9f %.9f %.9f %.9f\n", sp.timestamp,
                  t.x(), t.y(), t.z(), q.x(), q.y(), q.z(), q.w());
    os << buf;
  }
}

std::vector<Vec3> camera_centers(const Trajectory& traj) {
  std::vector<Vec3> out;
  out.reserve(traj.size());
  for (const StampedPose& sp : traj) out.push_back(sp.pose.inverse().translation());
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> associate(const Trajectory& est,
                                                           const Trajectory& gt,
                                                           double max_dt) {
  if (est.empty() || gt.empty()) {
    throw Error(ErrorCode::kNoAssociations, "empty trajectory");
  }
  std::vector<std::tuple<double, std::size_t, std::size_t>> cand;
  for (std::size_t i = 0; i < est.size(); ++i) {
    // gt is sorted; only the window within max_dt can match.
    auto lo = std::lower_bound(gt.begin(), gt.end(), est[i].timestamp - max_dt,
                               [](const StampedPose& p, double t) { return p.timestamp < t; });
    for (auto it = lo; it != gt.end() && it->timestamp <= est[i].timestamp + max_dt; ++it) {
      const double dt = std::abs(it->timestamp - est[i].timestamp);
      if (dt <= max_dt) cand.emplace_back(dt, i, static_cast<std::size_t>(it - gt.begin()));
    }
  }
  std::sort(cand.begin(), cand.end());
  std::vector<bool> used_e(est.size(), false), used_g(gt.size(), false);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (const auto& [dt, i, j] : cand) {
    if (used_e[i] || used_g[j]) continue;
    used_e[i] = used_g[j] = true;
    pairs.emplace_back(i, j);
  }
  if (pairs.empty()) throw Error(ErrorCode::kNoAssociations, "no timestamps within max_dt");
  std::sort(pairs.begin(), pairs.end());
  return pairs;
}

Similarity umeyama_align(const std::vector<Vec3>& est, const std::vector<Vec3>& gt,
                         bool with_scale) {
  if (est.size() != gt.size()) {
    throw Error(ErrorCode::kInvalidArgument, "umeyama: point counts differ");
  }
  const std::size_t n = est.size();
  if (n < 3) throw Error(ErrorCode::kDegenerateConfiguration, "umeyama needs >= 3 points");

  Vec3 mu_e = Vec3::Zero(), mu_g = Vec3::Zero();
  for (std::size_t k = 0; k < n; ++k) {
    mu_e += est[k];
    mu_g += gt[k];
  }
  mu_e /= static_cast<double>(n);
  mu_g /= static_cast<double>(n);

  Mat3 cov = Mat3::Zero();
  Mat3 scatter_e = Mat3::Zero();
  double var_e = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const Vec3 de = est[k] - mu_e, dg = gt[k] - mu_g;
    cov += dg * de.transpose();
    scatter_e += de * de.transpose();
    var_e += de.squaredNorm();
  }
  cov /= static_cast<double>(n);
  var_e /= static_cast<double>(n);

  // Collinear (or coincident) estimate points leave a rotation about the
  // line unconstrained.
  Eigen::JacobiSVD<Mat3> se(scatter_e);
  const auto sv = se.singularValues();
  if (!(sv(0) > 0.0) || sv(1) <= 1e-12 * sv(0)) {
    throw Error(ErrorCode::kDegenerateConfiguration, "points are collinear");
  }

  Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 S = Mat3::Identity();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) S(2, 2) = -1.0;

  Similarity sim;
  sim.rotation = svd.matrixU() * S * svd.matrixV().transpose();
  sim.scale = with_scale ? (svd.singularValues().asDiagonal() * S).trace() / var_e : 1.0;
  sim.translation = mu_g - sim.scale * sim.rotation * mu_e;
  return sim;
}

AteResult ate(const Trajectory& est, const Trajectory& gt, double max_dt) {
  const auto pairs = associate(est, gt, max_dt);
  const auto ce = camera_centers(est), cg = camera_centers(gt);
  std::vector<Vec3> pe, pg;
  for (const auto& [i, j] : pairs) {
    pe.push_back(ce[i]);
    pg.push_back(cg[j]);
  }
  AteResult r;
  r.pairs = pairs.size();
  r.alignment = umeyama_align(pe, pg, true);
  std::vector<double> err;
  double sq = 0.0, sum = 0.0;
  for (std::size_t k = 0; k < pe.size(); ++k) {
    const double e = (pg[k] - r.alignment.apply(pe[k])).norm();
    err.push_back(e);
    sq += e * e;
    sum += e;
    r.max = std::max(r.max, e);
  }
  const double n = static_cast<double>(err.size());
  r.rmse = std::sqrt(sq / n);
  r.mean = sum / n;
  std::sort(err.begin(), err.end());
  r.median = err.size() % 2 ? err[err.size() / 2]
                            : 0.5 * (err[err.size() / 2 - 1] + err[err.size() / 2]);
  return r;
}

}  // namespace stvo
