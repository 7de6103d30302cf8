#pragma once

// Confidence-weighted Gauss-Newton over keyframe poses and per-pixel inverse
// depths. Residuals are reprojection minus target correspondence, one per
// pixel and axis; each axis carries its own weight. Depths are eliminated by
// a Schur complement (the depth block is diagonal) and the reduced pose
// system is solved densely.

#include <vector>

#include <Eigen/Core>

#include "stvo/camera.hpp"
#include "stvo/lie.hpp"
#include "stvo/tensor.hpp"

namespace stvo {

struct BAEdge {
  int source = 0;  // slot into BAProblem::poses / inv_depths
  int target = 0;
  DenseArray target_coords;  // [2,H,W] absolute pixel targets in frame `target`
  DenseArray weights;        // [2,H,W] per-axis confidence
};

struct BAProblem {
  Camera camera;
  std::vector<Pose> poses;
  std::vector<InverseDepthMap> inv_depths;
  std::vector<BAEdge> edges;
  std::vector<bool> fixed;  // gauge: at least one pose fixed

  // Throws InvalidArgument / ShapeMismatch on inconsistent input.
  void validate() const;
};

// Axis weights below this are dropped from the residual set.
inline constexpr double kMinConfidence = 1e-4;
inline constexpr double kMinInvDepth = 1e-4;
inline constexpr double kMaxInvDepth = 1e4;

struct Damping {
  double pose = 1e-4;
  double depth = 1e-2;
};

struct ResidualVector {
  Eigen::VectorXd weighted;  // sqrt(w) * r for every active (pixel, axis) term
  double cost = 0.0;         // sum w r^2
};

// Active terms in edge order, pixels row-major, x before y. A pixel is active
// when it reprojects in front of the target camera and inside its raster; an
// axis is active when its weight is at least kMinConfidence.
ResidualVector residuals(const BAProblem& problem);
double ba_cost(const BAProblem& problem);

// d(weighted residuals)/d(variables) for small problems. Columns: 6 per pose
// (left perturbation, translation first) in slot order, then one per pixel of
// every inverse-depth map in slot order. Fixed poses keep their columns.
Eigen::MatrixXd stacked_jacobian(const BAProblem& problem);

struct BAStep {
  std::vector<Tangent> pose_updates;      // zero for fixed poses
  std::vector<DenseArray> depth_updates;  // [H,W] per slot
  Damping damping;                        // damping actually used
  double cost = 0.0;                      // cost at the linearization point
};

// One damped step: H = J^T W J, diag scaled by (1 + lambda) per block type.
// Escalates both dampings x10 up to three times if the reduced system is not
// positive definite, then throws SingularSystem.
BAStep gauss_newton_step(const BAProblem& problem, const Damping& damping);

// exp(xi) * G for poses; inverse depths updated and clamped.
void apply_step(BAProblem& problem, const BAStep& step);

struct BAIteration {
  double cost_before = 0.0;
  double cost_after = 0.0;
  double pose_update_norm = 0.0;
  double depth_update_norm = 0.0;
  Damping damping;
  bool accepted = false;
};

struct BAReport {
  std::vector<BAIteration> iterations;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  bool converged = false;
};

// Runs `inner_iters` damped steps in place. A step is kept only if it does
// not increase the cost; rejected steps raise the damping x10, accepted ones
// lower it x10 (not below the initial values).
BAReport run_dba(BAProblem& problem, int inner_iters, const Damping& initial = {});

}  // namespace stvo
