#pragma once

// Levenberg-Marquardt bundle adjustment over keyframe poses and map points with
// Huber-robust reprojection factors and unary point-plane regularizers.
//
// Cost:
//   sum_ij rho_r(|proj(T_i, X_j) - x_ij| / sqrt(var))  +  sum_k sum_{j in O_k} rho_p(sigma * pi_k^T X_j)
//
// The plane information weight is sigma^2: sigma scales the plane residual up, so
// with sigma = 100 a 1 cm point-plane residual weighs like a 1 px reprojection
// error. Planes are held fixed; only poses and points move.

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <map>
#include <set>
#include <vector>

#include <Eigen/Core>

#include "semplan/cluster_map.hpp"
#include "semplan/geometry.hpp"

namespace semplan {

enum class LinearSolver {
  /// Reduced camera system after eliminating the 3x3 point blocks.
  kSchur,
  /// Full dense normal equations; reference path for small problems.
  kDense,
};

struct BAConfig {
  /// Plane residual scale; information weight is sigma^2.
  double sigma = 100.0;
  int max_iterations = 20;
  int max_iterations_global = 50;
  double lambda_init = 1e-4;
  double lambda_up = 10.0;
  double lambda_down = 0.5;
  double lambda_max = 1e12;
  double rel_cost_tol = 1e-8;
  double update_tol = 1e-10;
  /// Huber elbow on the whitened reprojection error (pixels at unit variance).
  double huber_reprojection = 2.447;
  /// Huber elbow on the scaled plane residual; in meters this is 1.96 / sigma.
  double huber_plane = 1.96;
  /// 0.95 quantile of the 1-DoF chi-squared distribution.
  double chi2_plane = 3.841;
  /// Isotropic reprojection variance (px^2).
  double pixel_variance = 1.0;
  /// Gate-then-optimize rounds in optimize_planar.
  int outer_rounds = 2;
  bool use_plane_factors = true;
  LinearSolver solver = LinearSolver::kSchur;

  void validate() const;
  double plane_weight() const { return sigma * sigma; }
  /// Plane residual standard deviation implied by the weight (meters).
  double plane_sigma_eff() const { return 1.0 / sigma; }
};

struct HuberResult {
  double cost = 0.0;
  /// IRLS weight min(1, delta / |r|).
  double weight = 1.0;
};

HuberResult huber(double r, double delta);

struct ReprojectionLinearization {
  /// proj(T, X) - measured (pixels).
  Eigen::Vector2d residual;
  /// Derivative with respect to a left perturbation exp(xi) * T, xi = (omega, rho).
  Eigen::Matrix<double, 2, 6> jacobian_pose;
  Eigen::Matrix<double, 2, 3> jacobian_point;
};

/// Throws BehindCamera.
ReprojectionLinearization reprojection_residual_jacobian(const Pose3d& camera_from_world, const Intrinsics& k,
                                                         const Eigen::Vector3d& point, const Pixeld& measured);

struct PlaneLinearization {
  double residual = 0.0;
  Eigen::RowVector3d jacobian_point;
};

PlaneLinearization plane_residual_jacobian(const Plane3d& plane, const Eigen::Vector3d& point);

struct ReprojectionFactor {
  KeyframeId keyframe = 0;
  PointId point = 0;
  Pixeld measured = Pixeld::Zero();
  double variance = 1.0;
};

struct PlaneFactor {
  PointId point = 0;
  ClusterId cluster = 0;
  Plane3d plane;
  bool active = true;
};

struct BAProblem {
  Intrinsics intrinsics;
  std::map<KeyframeId, Pose3d> poses;
  std::set<KeyframeId> fixed;
  std::map<PointId, Eigen::Vector3d> points;
  std::vector<ReprojectionFactor> reprojection;
  std::vector<PlaneFactor> planes;

  /// Throws InvalidArgument when a factor references a missing variable or no pose is fixed.
  void validate() const;
};

struct BAWindow {
  std::vector<KeyframeId> keyframes;
  bool all = false;

  static BAWindow All() { return {{}, true}; }
  static BAWindow Of(std::vector<KeyframeId> ids) { return {std::move(ids), false}; }
};

/// Reprojection factors for every observation of points seen in the window, plane
/// factors for non-excluded members of clusters with accepted planes, oldest window
/// keyframe fixed plus every out-of-window observer. Throws EmptyWindow.
BAProblem build_problem(const SemanticMap& map, const BAWindow& window, const BAConfig& cfg, const Intrinsics& k);

struct CostBreakdown {
  double reprojection = 0.0;
  double plane = 0.0;
  double total = 0.0;
  /// False when some point sits at or behind a camera; costs are then +inf.
  bool valid = true;
};

CostBreakdown total_cost(const BAProblem& problem, const BAConfig& cfg);

struct TraceRow {
  int iteration = 0;
  double total = 0.0;
  double reprojection = 0.0;
  double plane = 0.0;
  double lambda = 0.0;
  bool accepted = false;
};

enum class StopReason { kZeroCost, kSmallUpdate, kSmallDecrease, kMaxIterations, kLambdaLimit };

struct LMResult {
  /// Row 0 is the initial state; one row per attempted step after that.
  std::vector<TraceRow> trace;
  int iterations = 0;
  StopReason reason = StopReason::kMaxIterations;
};

/// Runs LM in place on the problem with the current active plane-factor set.
/// Throws SingularNormalEquations when the damped system cannot be solved at lambda_max.
LMResult optimize_lm(BAProblem& problem, const BAConfig& cfg, int max_iterations);

/// Deactivates plane factors whose squared normalized residual exceeds the gate and
/// reactivates the others. Returns the indices of disabled factors.
std::vector<std::size_t> gate_outliers(BAProblem& problem, const BAConfig& cfg);

/// outer_rounds x (gate_outliers, optimize_lm). Iteration numbers continue across rounds.
LMResult optimize_planar(BAProblem& problem, const BAConfig& cfg, int max_iterations);

/// Copies optimized free poses and points back into the map.
void write_back(const BAProblem& problem, SemanticMap& map);

/// Mean |pi^T X| over active plane factors (0 when there are none).
double mean_plane_residual(const BAProblem& problem);

/// RMS reprojection error in pixels over all factors.
double rms_reprojection(const BAProblem& problem);

void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& trace);

}  // namespace semplan
