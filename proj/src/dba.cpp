#include "stvo/dba.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Cholesky>

#include "stvo/error.hpp"

namespace stvo {

namespace {

using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Row6 = Eigen::Matrix<double, 1, 6>;

struct EdgeFrame {
  Mat3 R;
  Vec3 t;
};

EdgeFrame edge_frame(const BAProblem& pb, const BAEdge& e) {
  const Pose g = relative(pb.poses[e.source], pb.poses[e.target]);
  return {g.rotation().matrix(), g.translation()};
}

struct Term {
  Vec2 residual;
  Eigen::Matrix<double, 2, 6> d_i, d_j;
  Vec2 d_depth;
};

// Reprojection of pixel (x,y) of the source frame. Returns false when the
// pixel is not active (behind camera j or outside its raster).
bool reproject(const Camera& cam, const EdgeFrame& f, int x, int y, double d, Vec2& p,
               Vec3* xi_out = nullptr, Vec3* xj_out = nullptr) {
  const Vec3 Xi((x - cam.cx) / cam.fx / d, (y - cam.cy) / cam.fy / d, 1.0 / d);
  const Vec3 Xj = f.R * Xi + f.t;
  if (Xj.z() <= kMinDepth) return false;
  p = Vec2(cam.fx * Xj.x() / Xj.z() + cam.cx, cam.fy * Xj.y() / Xj.z() + cam.cy);
  if (!in_frame(cam, p)) return false;
  if (xi_out) *xi_out = Xi;
  if (xj_out) *xj_out = Xj;
  return true;
}

bool linearize(const Camera& cam, const EdgeFrame& f, const BAEdge& e, int x, int y,
               double d, Term& term) {
  Vec2 p;
  Vec3 Xi, Xj;
  if (!reproject(cam, f, x, y, d, p, &Xi, &Xj)) return false;
  const double iz = 1.0 / Xj.z();
  Eigen::Matrix<double, 2, 3> Jp;
  Jp << cam.fx * iz, 0.0, -cam.fx * Xj.x() * iz * iz,  //
      0.0, cam.fy * iz, -cam.fy * Xj.y() * iz * iz;
  Eigen::Matrix<double, 3, 6> dj, di;
  dj << Mat3::Identity(), -skew(Xj);
  di << Mat3::Identity(), -skew(Xi);
  term.d_j = Jp * dj;
  term.d_i = -Jp * f.R * di;
  term.d_depth = Jp * (-f.R * Xi / d);
  term.residual = p - Vec2(e.target_coords(0, y, x), e.target_coords(1, y, x));
  return true;
}

double edge_cost(const BAProblem& pb, const BAEdge& e) {
  const Camera& cam = pb.camera;
  const EdgeFrame f = edge_frame(pb, e);
  const InverseDepthMap& d = pb.inv_depths[e.source];
  double cost = 0.0;
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      const double wx = e.weights(0, y, x), wy = e.weights(1, y, x);
      if (wx < kMinConfidence && wy < kMinConfidence) continue;
      Vec2 p;
      if (!reproject(cam, f, x, y, d(y, x), p)) continue;
      const double rx = p.x() - e.target_coords(0, y, x);
      const double ry = p.y() - e.target_coords(1, y, x);
      if (wx >= kMinConfidence) cost += wx * rx * rx;
      if (wy >= kMinConfidence) cost += wy * ry * ry;
    }
  }
  return cost;
}

// Per-edge normal-equation pieces; each edge is accumulated serially so the
// result does not depend on how edges are spread over threads.
struct EdgeSystem {
  Mat6 b_ii = Mat6::Zero(), b_ij = Mat6::Zero(), b_jj = Mat6::Zero();
  Vec6 g_i = Vec6::Zero(), g_j = Vec6::Zero();
  std::vector<double> c, g_d;   // per source pixel
  std::vector<Vec6> e_i, e_j;   // pose-depth coupling per source pixel
};

EdgeSystem edge_system(const BAProblem& pb, const BAEdge& e) {
  const Camera& cam = pb.camera;
  const std::size_t n = static_cast<std::size_t>(cam.height) * cam.width;
  EdgeSystem s;
  s.c.assign(n, 0.0);
  s.g_d.assign(n, 0.0);
  s.e_i.assign(n, Vec6::Zero());
  s.e_j.assign(n, Vec6::Zero());
  const EdgeFrame f = edge_frame(pb, e);
  const InverseDepthMap& d = pb.inv_depths[e.source];
  Term term;
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      const double w[2] = {e.weights(0, y, x), e.weights(1, y, x)};
      if (w[0] < kMinConfidence && w[1] < kMinConfidence) continue;
      if (!linearize(cam, f, e, x, y, d(y, x), term)) continue;
      const std::size_t k = static_cast<std::size_t>(y) * cam.width + x;
      for (int a = 0; a < 2; ++a) {
        if (w[a] < kMinConfidence) continue;
        const Row6 ji = term.d_i.row(a), jj = term.d_j.row(a);
        const double jd = term.d_depth(a), r = term.residual(a), wa = w[a];
        s.b_ii.noalias() += wa * ji.transpose() * ji;
        s.b_ij.noalias() += wa * ji.transpose() * jj;
        s.b_jj.noalias() += wa * jj.transpose() * jj;
        s.g_i.noalias() -= wa * r * ji.transpose();
        s.g_j.noalias() -= wa * r * jj.transpose();
        s.c[k] += wa * jd * jd;
        s.g_d[k] -= wa * jd * r;
        s.e_i[k].noalias() += wa * jd * ji.transpose();
        s.e_j[k].noalias() += wa * jd * jj.transpose();
      }
    }
  }
  return s;
}

}  // namespace

void BAProblem::validate() const {
  if (poses.empty()) throw Error(ErrorCode::kInvalidArgument, "BA problem without poses");
  if (inv_depths.size() != poses.size() || fixed.size() != poses.size()) {
    throw Error(ErrorCode::kInvalidArgument, "BA problem: poses, depths and gauge disagree");
  }
  if (std::none_of(fixed.begin(), fixed.end(), [](bool b) { return b; })) {
    throw Error(ErrorCode::kInvalidArgument, "BA problem: no pose fixed");
  }
  const int n = static_cast<int>(poses.size());
  for (const InverseDepthMap& d : inv_depths) {
    require_shape(d.values(), {camera.height, camera.width}, "BA inverse depth");
  }
  for (const BAEdge& e : edges) {
    if (e.source < 0 || e.source >= n || e.target < 0 || e.target >= n || e.source == e.target) {
      throw Error(ErrorCode::kInvalidArgument, "BA edge endpoints");
    }
    require_shape(e.target_coords, {2, camera.height, camera.width}, "BA edge targets");
    require_shape(e.weights, {2, camera.height, camera.width}, "BA edge weights");
  }
}

ResidualVector residuals(const BAProblem& pb) {
  pb.validate();
  const Camera& cam = pb.camera;
  std::vector<double> out;
  double cost = 0.0;
  for (const BAEdge& e : pb.edges) {
    const EdgeFrame f = edge_frame(pb, e);
    const InverseDepthMap& d = pb.inv_depths[e.source];
    for (int y = 0; y < cam.height; ++y) {
      for (int x = 0; x < cam.width; ++x) {
        Vec2 p;
        if (!reproject(cam, f, x, y, d(y, x), p)) continue;
        for (int a = 0; a < 2; ++a) {
          const double w = e.weights(a, y, x);
          if (w < kMinConfidence) continue;
          const double r = p(a) - e.target_coords(a, y, x);
          out.push_back(std::sqrt(w) * r);
          cost += w * r * r;
        }
      }
    }
  }
  ResidualVector rv;
  rv.weighted = Eigen::Map<Eigen::VectorXd>(out.data(), static_cast<Eigen::Index>(out.size()));
  rv.cost = cost;
  return rv;
}

double ba_cost(const BAProblem& pb) {
  pb.validate();
  const int m = static_cast<int>(pb.edges.size());
  std::vector<double> per_edge(m, 0.0);
#pragma omp parallel for schedule(dynamic)
  for (int k = 0; k < m; ++k) per_edge[k] = edge_cost(pb, pb.edges[k]);
  double cost = 0.0;
  for (double c : per_edge) cost += c;
  return cost;
}

Eigen::MatrixXd stacked_jacobian(const BAProblem& pb) {
  pb.validate();
  const Camera& cam = pb.camera;
  const int np = static_cast<int>(pb.poses.size());
  const int hw = cam.height * cam.width;
  std::vector<Eigen::RowVectorXd> rows;
  const Eigen::Index cols = 6 * np + static_cast<Eigen::Index>(np) * hw;
  Term term;
  for (const BAEdge& e : pb.edges) {
    const EdgeFrame f = edge_frame(pb, e);
    const InverseDepthMap& d = pb.inv_depths[e.source];
    for (int y = 0; y < cam.height; ++y) {
      for (int x = 0; x < cam.width; ++x) {
        if (!linearize(cam, f, e, x, y, d(y, x), term)) continue;
        for (int a = 0; a < 2; ++a) {
          const double w = e.weights(a, y, x);
          if (w < kMinConfidence) continue;
          const double sw = std::sqrt(w);
          Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(cols);
          row.segment<6>(6 * e.source) = sw * term.d_i.row(a);
          row.segment<6>(6 * e.target) = sw * term.d_j.row(a);
          row(6 * np + static_cast<Eigen::Index>(e.source) * hw + y * cam.width + x) =
              sw * term.d_depth(a);
          rows.push_back(std::move(row));
        }
      }
    }
  }
  Eigen::MatrixXd J(static_cast<Eigen::Index>(rows.size()), cols);
  for (std::size_t r = 0; r < rows.size(); ++r) J.row(static_cast<Eigen::Index>(r)) = rows[r];
  return J;
}

BAStep gauss_newton_step(const BAProblem& pb, const Damping& damping) {
  pb.validate();
  const Camera& cam = pb.camera;
  const int np = static_cast<int>(pb.poses.size());
  const int ne = static_cast<int>(pb.edges.size());
  const std::size_t hw = static_cast<std::size_t>(cam.height) * cam.width;

  std::vector<EdgeSystem> sys(ne);
#pragma omp parallel for schedule(dynamic)
  for (int k = 0; k < ne; ++k) sys[k] = edge_system(pb, pb.edges[k]);

  const int dim = 6 * np;
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(dim);
  std::vector<std::vector<int>> out_edges(np);
  for (int k = 0; k < ne; ++k) {
    const int i = pb.edges[k].source, j = pb.edges[k].target;
    b.block<6, 6>(6 * i, 6 * i) += sys[k].b_ii;
    b.block<6, 6>(6 * i, 6 * j) += sys[k].b_ij;
    b.block<6, 6>(6 * j, 6 * i) += sys[k].b_ij.transpose();
    b.block<6, 6>(6 * j, 6 * j) += sys[k].b_jj;
    g.segment<6>(6 * i) += sys[k].g_i;
    g.segment<6>(6 * j) += sys[k].g_j;
    out_edges[i].push_back(k);
  }

  // Undamped depth diagonal and gradient per slot, summed over the slot's
  // outgoing edges in edge order.
  std::vector<std::vector<double>> c(np, std::vector<double>(hw, 0.0));
  std::vector<std::vector<double>> gd(np, std::vector<double>(hw, 0.0));
  for (int s = 0; s < np; ++s) {
    for (int k : out_edges[s]) {
      for (std::size_t p = 0; p < hw; ++p) {
        c[s][p] += sys[k].c[p];
        gd[s][p] += sys[k].g_d[p];
      }
    }
  }

  std::vector<int> free;
  for (int s = 0; s < np; ++s)
    if (!pb.fixed[s]) free.push_back(s);
  const int nf = static_cast<int>(free.size());

  BAStep step;
  step.cost = ba_cost(pb);
  Damping damp = damping;
  for (int attempt = 0;; ++attempt) {
    // Schur complement per source slot into private accumulators, then an
    // ordered sum.
    std::vector<Eigen::MatrixXd> s_blocks(np);
    std::vector<Eigen::VectorXd> s_rhs(np);
    std::vector<std::vector<double>> c_damped(np);
#pragma omp parallel for schedule(dynamic)
    for (int s = 0; s < np; ++s) {
      Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(dim, dim);
      Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim);
      std::vector<double>& cd = c_damped[s];
      cd.assign(hw, 0.0);
      const std::vector<int>& ks = out_edges[s];
      std::vector<std::pair<int, Vec6>> blocks;
      for (std::size_t p = 0; p < hw; ++p) {
        cd[p] = c[s][p] * (1.0 + damp.depth);
        if (!(cd[p] > 0.0)) continue;
        blocks.clear();
        Vec6 es = Vec6::Zero();
        for (int k : ks) es += sys[k].e_i[p];
        blocks.emplace_back(s, es);
        for (int k : ks) blocks.emplace_back(pb.edges[k].target, sys[k].e_j[p]);
        const double inv_c = 1.0 / cd[p];
        for (const auto& [a, ea] : blocks) {
          rhs.segment<6>(6 * a) -= ea * (gd[s][p] * inv_c);
          for (const auto& [bb, eb] : blocks) {
            acc.block<6, 6>(6 * a, 6 * bb).noalias() -= ea * (eb.transpose() * inv_c);
          }
        }
      }
      s_blocks[s] = std::move(acc);
      s_rhs[s] = std::move(rhs);
    }

    Eigen::MatrixXd reduced = b;
    for (int k = 0; k < dim; ++k) reduced(k, k) += damp.pose * b(k, k);
    Eigen::VectorXd rhs = g;
    for (int s = 0; s < np; ++s) {
      reduced += s_blocks[s];
      rhs += s_rhs[s];
    }

    Eigen::VectorXd dx = Eigen::VectorXd::Zero(dim);
    bool ok = true;
    if (nf > 0) {
      Eigen::MatrixXd sf(6 * nf, 6 * nf);
      Eigen::VectorXd rf(6 * nf);
      for (int a = 0; a < nf; ++a) {
        rf.segment<6>(6 * a) = rhs.segment<6>(6 * free[a]);
        for (int bb = 0; bb < nf; ++bb) {
          sf.block<6, 6>(6 * a, 6 * bb) = reduced.block<6, 6>(6 * free[a], 6 * free[bb]);
        }
      }
      Eigen::LLT<Eigen::MatrixXd> llt(sf);
      ok = llt.info() == Eigen::Success;
      if (ok) {
        const Eigen::VectorXd sol = llt.solve(rf);
        ok = sol.allFinite();
        for (int a = 0; a < nf && ok; ++a) dx.segment<6>(6 * free[a]) = sol.segment<6>(6 * a);
      }
    }
    if (!ok) {
      if (attempt == 3) {
        throw Error(ErrorCode::kSingularSystem,
                    "reduced pose system not positive definite after damping escalation");
      }
      damp.pose *= 10.0;
      damp.depth *= 10.0;
      continue;
    }

    step.damping = damp;
    step.pose_updates.assign(np, Tangent::Zero());
    for (int s : free) step.pose_updates[s] = dx.segment<6>(6 * s);
    step.depth_updates.assign(np, DenseArray({cam.height, cam.width}));
#pragma omp parallel for schedule(dynamic)
    for (int s = 0; s < np; ++s) {
      double* out = step.depth_updates[s].ptr();
      const std::vector<int>& ks = out_edges[s];
      for (std::size_t p = 0; p < hw; ++p) {
        if (!(c_damped[s][p] > 0.0)) continue;
        Vec6 es = Vec6::Zero();
        for (int k : ks) es += sys[k].e_i[p];
        double r = gd[s][p] - es.dot(dx.segment<6>(6 * s));
        for (int k : ks) r -= sys[k].e_j[p].dot(dx.segment<6>(6 * pb.edges[k].target));
        out[p] = r / c_damped[s][p];
      }
    }
    return step;
  }
}

void apply_step(BAProblem& pb, const BAStep& step) {
  const int np = static_cast<int>(pb.poses.size());
  for (int s = 0; s < np; ++s) {
    if (pb.fixed[s]) continue;
    const Tangent& xi = step.pose_updates.at(s);
    if (xi.isZero(0.0)) continue;
    pb.poses[s] = lie::retract(xi, pb.poses[s]);
  }
  for (int s = 0; s < np; ++s) {
    DenseArray& d = pb.inv_depths[s].values();
    const DenseArray& dd = step.depth_updates.at(s);
    for (std::size_t p = 0; p < d.size(); ++p) {
      if (dd[p] == 0.0) continue;
      d[p] = std::clamp(d[p] + dd[p], kMinInvDepth, kMaxInvDepth);
    }
  }
}

BAReport run_dba(BAProblem& pb, int inner_iters, const Damping& initial) {
  if (inner_iters < 1) throw Error(ErrorCode::kInvalidArgument, "inner_iters must be >= 1");
  BAReport report;
  double cost = ba_cost(pb);
  report.initial_cost = cost;
  Damping damp = initial;
  for (int it = 0; it < inner_iters; ++it) {
    if (cost == 0.0) {
      report.converged = true;
      break;
    }
    BAStep step = gauss_newton_step(pb, damp);
    BAIteration rec;
    rec.cost_before = cost;
    rec.damping = step.damping;
    double pose_sq = 0.0, depth_sq = 0.0;
    for (const Tangent& xi : step.pose_updates) pose_sq += xi.squaredNorm();
    for (const DenseArray& dd : step.depth_updates)
      for (double v : dd.data()) depth_sq += v * v;
    rec.pose_update_norm = std::sqrt(pose_sq);
    rec.depth_update_norm = std::sqrt(depth_sq);
    if (pose_sq == 0.0 && depth_sq == 0.0) {
      rec.cost_after = cost;
      rec.accepted = true;
      report.iterations.push_back(rec);
      report.converged = true;
      break;
    }

    std::vector<Pose> saved_poses = pb.poses;
    std::vector<InverseDepthMap> saved_depths = pb.inv_depths;
    apply_step(pb, step);
    const double next = ba_cost(pb);
    rec.cost_after = next;
    if (next <= cost) {
      rec.accepted = true;
      cost = next;
      damp.pose = std::max(step.damping.pose / 10.0, initial.pose);
      damp.depth = std::max(step.damping.depth / 10.0, initial.depth);
      if (rec.pose_update_norm < 1e-12 && rec.depth_update_norm < 1e-12) report.converged = true;
    } else {
      pb.poses = std::move(saved_poses);
      pb.inv_depths = std::move(saved_depths);
      damp.pose = step.damping.pose * 10.0;
      damp.depth = step.damping.depth * 10.0;
    }
    report.iterations.push_back(rec);
    if (report.converged) break;
  }
  report.final_cost = cost;
  return report;
}

}  // namespace stvo
