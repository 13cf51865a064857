#include "semplan/planar_ba.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <fmt/format.h>

namespace semplan {

void BAConfig::validate() const {
  if (!(sigma > 0.0)) throw Error(ErrorCode::kConfig, "ba.sigma must be > 0");
  if (!(lambda_init > 0.0)) throw Error(ErrorCode::kConfig, "ba.lambda_init must be > 0");
  if (!(rel_cost_tol > 0.0) || !(update_tol > 0.0)) throw Error(ErrorCode::kConfig, "ba tolerances must be > 0");
  if (max_iterations < 1 || max_iterations_global < 1) throw Error(ErrorCode::kConfig, "ba iterations must be >= 1");
  if (!(huber_reprojection > 0.0) || !(huber_plane > 0.0)) throw Error(ErrorCode::kConfig, "huber deltas must be > 0");
  if (!(pixel_variance > 0.0)) throw Error(ErrorCode::kConfig, "ba.pixel_variance must be > 0");
  if (!(lambda_up > 1.0) || !(lambda_down > 0.0 && lambda_down < 1.0))
    throw Error(ErrorCode::kConfig, "lambda schedule must grow on rejection and shrink on acceptance");
}

HuberResult huber(double r, double delta) {
  const double a = std::abs(r);
  if (a <= delta) return {0.5 * r * r, 1.0};
  return {delta * (a - 0.5 * delta), delta / a};
}

ReprojectionLinearization reprojection_residual_jacobian(const Pose3d& camera_from_world, const Intrinsics& k,
                                                         const Eigen::Vector3d& point, const Pixeld& measured) {
  const Eigen::Vector3d xc = camera_from_world * point;
  const Pixeld px = project_camera(k, xc);
  const double iz = 1.0 / xc.z();
  const double iz2 = iz * iz;

  Eigen::Matrix<double, 2, 3> d_proj;
  d_proj << k.fx * iz, 0.0, -k.fx * xc.x() * iz2,
            0.0, k.fy * iz, -k.fy * xc.y() * iz2;

  Eigen::Matrix<double, 3, 6> d_xc;
  d_xc.leftCols<3>() = -hat(xc);
  d_xc.rightCols<3>().setIdentity();

  ReprojectionLinearization lin;
  lin.residual = px - measured;
  lin.jacobian_pose = d_proj * d_xc;
  lin.jacobian_point = d_proj * camera_from_world.rotationMatrix();
  return lin;
}

PlaneLinearization plane_residual_jacobian(const Plane3d& plane, const Eigen::Vector3d& point) {
  return {plane.residual(point), plane.normal().transpose()};
}

void BAProblem::validate() const {
  if (fixed.empty()) throw Error(ErrorCode::kInvalidArgument, "no fixed pose (gauge)");
  for (KeyframeId id : fixed)
    if (!poses.count(id)) throw Error(ErrorCode::kInvalidArgument, "fixed pose is not a variable");
  for (const auto& f : reprojection)
    if (!poses.count(f.keyframe) || !points.count(f.point))
      throw Error(ErrorCode::kInvalidArgument, "reprojection factor references a missing variable");
  for (const auto& f : planes)
    if (!points.count(f.point)) throw Error(ErrorCode::kInvalidArgument, "plane factor references a missing point");
}

BAProblem build_problem(const SemanticMap& map, const BAWindow& window, const BAConfig& cfg, const Intrinsics& k) {
  std::vector<KeyframeId> in_window;
  if (window.all) {
    for (const auto& [id, kf] : map.keyframes()) in_window.push_back(id);
  } else {
    for (KeyframeId id : window.keyframes)
      if (map.has_keyframe(id)) in_window.push_back(id);
  }
  if (in_window.empty()) throw Error(ErrorCode::kEmptyWindow, "no keyframes in the BA window");
  std::sort(in_window.begin(), in_window.end());
  in_window.erase(std::unique(in_window.begin(), in_window.end()), in_window.end());
  const std::set<KeyframeId> window_set(in_window.begin(), in_window.end());

  const KeyframeId oldest = *std::min_element(in_window.begin(), in_window.end(), [&](KeyframeId a, KeyframeId b) {
    const double ta = map.keyframe(a).timestamp;
    const double tb = map.keyframe(b).timestamp;
    return ta < tb || (ta == tb && a < b);
  });

  BAProblem problem;
  problem.intrinsics = k;
  for (KeyframeId id : in_window) problem.poses[id] = map.keyframe(id).pose;
  problem.fixed.insert(oldest);

  for (const auto& [pid, p] : map.points()) {
    const bool seen = std::any_of(p.observations.begin(), p.observations.end(),
                                  [&](const Observation& o) { return window_set.count(o.keyframe) != 0; });
    if (!seen) continue;
    for (const Observation& o : p.observations) {
      const Pose3d& pose = map.keyframe(o.keyframe).pose;
      if (!((pose * p.position).z() > kMinDepth)) continue;
      if (!problem.poses.count(o.keyframe)) {
        problem.poses[o.keyframe] = pose;
        problem.fixed.insert(o.keyframe);
      }
      problem.reprojection.push_back({o.keyframe, pid, o.pixel, cfg.pixel_variance / std::max(o.weight, 1e-12)});
      problem.points[pid] = p.position;
    }
  }

  if (cfg.use_plane_factors) {
    for (const auto& [pid, x] : problem.points) {
      const MapPoint& p = map.point(pid);
      if (!p.cluster || !map.has_cluster(*p.cluster)) continue;
      const Cluster& c = map.cluster(*p.cluster);
      if (!c.plane || c.excluded.count(pid)) continue;
      problem.planes.push_back({pid, c.id, *c.plane, true});
    }
  }
  return problem;
}

namespace {

CostBreakdown evaluate(const std::map<KeyframeId, Pose3d>& poses, const std::map<PointId, Eigen::Vector3d>& points,
                       const BAProblem& problem, const BAConfig& cfg) {
  CostBreakdown c;
  for (const auto& f : problem.reprojection) {
    const Eigen::Vector3d xc = poses.at(f.keyframe) * points.at(f.point);
    if (!(xc.z() > kMinDepth)) {
      const double inf = std::numeric_limits<double>::infinity();
      return {inf, inf, inf, false};
    }
    const Eigen::Vector2d r = project_camera(problem.intrinsics, xc) - f.measured;
    c.reprojection += huber(r.norm() / std::sqrt(f.variance), cfg.huber_reprojection).cost;
  }
  for (const auto& f : problem.planes) {
    if (!f.active) continue;
    c.plane += huber(cfg.sigma * f.plane.residual(points.at(f.point)), cfg.huber_plane).cost;
  }
  c.total = c.reprojection + c.plane;
  return c;
}

// Index bookkeeping and normal-equation blocks for one linearization.
struct NormalEquations {
  std::vector<KeyframeId> pose_ids;
  std::map<KeyframeId, int> pose_index;  // -1 for fixed
  std::vector<PointId> point_ids;
  std::map<PointId, int> point_index;

  Eigen::MatrixXd hcc;
  Eigen::VectorXd gc;
  std::vector<Eigen::Matrix3d> hpp;
  std::vector<Eigen::Vector3d> gp;
  // Per point: (pose index, 6x3 coupling block).
  std::vector<std::vector<std::pair<int, Eigen::Matrix<double, 6, 3>>>> hcp;
};

NormalEquations linearize(const BAProblem& problem, const BAConfig& cfg) {
  NormalEquations ne;
  for (const auto& [id, pose] : problem.poses) {
    if (problem.fixed.count(id)) {
      ne.pose_index[id] = -1;
    } else {
      ne.pose_index[id] = int(ne.pose_ids.size());
      ne.pose_ids.push_back(id);
    }
  }
  for (const auto& [id, x] : problem.points) {
    ne.point_index[id] = int(ne.point_ids.size());
    ne.point_ids.push_back(id);
  }
  const int np = int(ne.pose_ids.size());
  const int nx = int(ne.point_ids.size());
  ne.hcc = Eigen::MatrixXd::Zero(6 * np, 6 * np);
  ne.gc = Eigen::VectorXd::Zero(6 * np);
  ne.hpp.assign(nx, Eigen::Matrix3d::Zero());
  ne.gp.assign(nx, Eigen::Vector3d::Zero());
  ne.hcp.assign(nx, {});

  for (const auto& f : problem.reprojection) {
    const auto lin = reprojection_residual_jacobian(problem.poses.at(f.keyframe), problem.intrinsics,
                                                    problem.points.at(f.point), f.measured);
    const double whitened = lin.residual.norm() / std::sqrt(f.variance);
    const double w = huber(whitened, cfg.huber_reprojection).weight / f.variance;
    const int ci = ne.pose_index.at(f.keyframe);
    const int pj = ne.point_index.at(f.point);
    ne.hpp[pj] += w * lin.jacobian_point.transpose() * lin.jacobian_point;
    ne.gp[pj] += w * lin.jacobian_point.transpose() * lin.residual;
    if (ci < 0) continue;
    ne.hcc.block<6, 6>(6 * ci, 6 * ci) += w * lin.jacobian_pose.transpose() * lin.jacobian_pose;
    ne.gc.segment<6>(6 * ci) += w * lin.jacobian_pose.transpose() * lin.residual;
    const Eigen::Matrix<double, 6, 3> coupling = w * lin.jacobian_pose.transpose() * lin.jacobian_point;
    auto& blocks = ne.hcp[pj];
    auto it = std::find_if(blocks.begin(), blocks.end(), [ci](const auto& b) { return b.first == ci; });
    if (it == blocks.end()) {
      blocks.emplace_back(ci, coupling);
    } else {
      it->second += coupling;
    }
  }

  const double plane_w = cfg.plane_weight();
  for (const auto& f : problem.planes) {
    if (!f.active) continue;
    const auto lin = plane_residual_jacobian(f.plane, problem.points.at(f.point));
    const double w = huber(cfg.sigma * lin.residual, cfg.huber_plane).weight * plane_w;
    const int pj = ne.point_index.at(f.point);
    ne.hpp[pj] += w * lin.jacobian_point.transpose() * lin.jacobian_point;
    ne.gp[pj] += w * lin.jacobian_point.transpose() * lin.residual;
  }
  return ne;
}

Eigen::Matrix3d damped_point_block(const Eigen::Matrix3d& h, double lambda) {
  const double scale = std::max(h.trace() / 3.0, 1e-12);
  return h + lambda * scale * Eigen::Matrix3d::Identity();
}

double pose_damping(double diag) { return std::max(diag, 1e-12); }

// Solves the damped system; returns false if it is numerically unsolvable.
bool solve_step(const NormalEquations& ne, double lambda, LinearSolver solver, Eigen::VectorXd& dc,
                std::vector<Eigen::Vector3d>& dp) {
  const int np = int(ne.pose_ids.size());
  const int nx = int(ne.point_ids.size());
  dp.assign(nx, Eigen::Vector3d::Zero());
  dc = Eigen::VectorXd::Zero(6 * np);

  if (solver == LinearSolver::kDense) {
    const int n = 6 * np + 3 * nx;
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd b(n);
    h.topLeftCorner(6 * np, 6 * np) = ne.hcc;
    for (int i = 0; i < 6 * np; ++i) h(i, i) += lambda * pose_damping(ne.hcc(i, i));
    b.head(6 * np) = -ne.gc;
    for (int j = 0; j < nx; ++j) {
      const int o = 6 * np + 3 * j;
      h.block<3, 3>(o, o) = damped_point_block(ne.hpp[j], lambda);
      b.segment<3>(o) = -ne.gp[j];
      for (const auto& [ci, w] : ne.hcp[j]) {
        h.block<6, 3>(6 * ci, o) = w;
        h.block<3, 6>(o, 6 * ci) = w.transpose();
      }
    }
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
    if (ldlt.info() != Eigen::Success) return false;
    const Eigen::VectorXd x = ldlt.solve(b);
    if (!x.allFinite()) return false;
    dc = x.head(6 * np);
    for (int j = 0; j < nx; ++j) dp[j] = x.segment<3>(6 * np + 3 * j);
    return true;
  }

  Eigen::MatrixXd s = ne.hcc;
  for (int i = 0; i < 6 * np; ++i) s(i, i) += lambda * pose_damping(ne.hcc(i, i));
  Eigen::VectorXd rhs = -ne.gc;
  std::vector<Eigen::Matrix3d> v_inv(nx);
  for (int j = 0; j < nx; ++j) {
    const Eigen::Matrix3d v = damped_point_block(ne.hpp[j], lambda);
    bool invertible = false;
    double det = 0.0;
    v.computeInverseAndDetWithCheck(v_inv[j], det, invertible, 1e-300);
    if (!invertible || !v_inv[j].allFinite()) return false;
    const Eigen::Vector3d vb = v_inv[j] * (-ne.gp[j]);
    const auto& blocks = ne.hcp[j];
    for (const auto& [ci, wi] : blocks) {
      const Eigen::Matrix<double, 6, 3> wv = wi * v_inv[j];
      rhs.segment<6>(6 * ci) -= wv * (-ne.gp[j]);
      for (const auto& [ck, wk] : blocks) s.block<6, 6>(6 * ci, 6 * ck) -= wv * wk.transpose();
    }
    dp[j] = vb;
  }
  if (np > 0) {
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(s);
    if (ldlt.info() != Eigen::Success) return false;
    dc = ldlt.solve(rhs);
    if (!dc.allFinite()) return false;
  }
  for (int j = 0; j < nx; ++j) {
    Eigen::Vector3d corr = Eigen::Vector3d::Zero();
    for (const auto& [ci, w] : ne.hcp[j]) corr += w.transpose() * dc.segment<6>(6 * ci);
    dp[j] -= v_inv[j] * corr;
    if (!dp[j].allFinite()) return false;
  }
  return true;
}

}  // namespace

CostBreakdown total_cost(const BAProblem& problem, const BAConfig& cfg) {
  return evaluate(problem.poses, problem.points, problem, cfg);
}

LMResult optimize_lm(BAProblem& problem, const BAConfig& cfg, int max_iterations) {
  cfg.validate();
  problem.validate();
  LMResult result;
  double lambda = cfg.lambda_init;
  CostBreakdown cost = total_cost(problem, cfg);
  if (!cost.valid) throw Error(ErrorCode::kBehindCamera, "initial BA state has points behind a camera");
  result.trace.push_back({0, cost.total, cost.reprojection, cost.plane, lambda, true});
  if (cost.total <= 0.0) {
    result.reason = StopReason::kZeroCost;
    return result;
  }

  NormalEquations ne = linearize(problem, cfg);
  Eigen::VectorXd dc;
  std::vector<Eigen::Vector3d> dp;
  result.reason = StopReason::kMaxIterations;
  for (int iter = 1; iter <= max_iterations; ++iter) {
    result.iterations = iter;
    if (!solve_step(ne, lambda, cfg.solver, dc, dp)) {
      result.trace.push_back({iter, cost.total, cost.reprojection, cost.plane, lambda, false});
      lambda *= cfg.lambda_up;
      if (lambda > cfg.lambda_max)
        throw Error(ErrorCode::kSingularNormalEquations, "damped normal equations unsolvable at lambda_max");
      continue;
    }
    double step2 = dc.squaredNorm();
    for (const auto& d : dp) step2 += d.squaredNorm();
    if (std::sqrt(step2) < cfg.update_tol) {
      result.iterations = iter - 1;
      result.reason = StopReason::kSmallUpdate;
      break;
    }

    std::map<KeyframeId, Pose3d> trial_poses = problem.poses;
    for (std::size_t i = 0; i < ne.pose_ids.size(); ++i) {
      Pose3d& pose = trial_poses.at(ne.pose_ids[i]);
      pose = se3_exp<double>(dc.segment<6>(6 * Eigen::Index(i))) * pose;
    }
    std::map<PointId, Eigen::Vector3d> trial_points = problem.points;
    for (std::size_t j = 0; j < ne.point_ids.size(); ++j) trial_points.at(ne.point_ids[j]) += dp[j];

    const CostBreakdown trial = evaluate(trial_poses, trial_points, problem, cfg);
    if (trial.valid && trial.total < cost.total) {
      const double decrease = (cost.total - trial.total) / cost.total;
      problem.poses = std::move(trial_poses);
      problem.points = std::move(trial_points);
      cost = trial;
      lambda = std::max(lambda * cfg.lambda_down, 1e-300);
      result.trace.push_back({iter, cost.total, cost.reprojection, cost.plane, lambda, true});
      if (decrease < cfg.rel_cost_tol) {
        result.reason = StopReason::kSmallDecrease;
        break;
      }
      ne = linearize(problem, cfg);
    } else {
      lambda *= cfg.lambda_up;
      result.trace.push_back({iter, trial.total, trial.reprojection, trial.plane, lambda, false});
      if (lambda > cfg.lambda_max) {
        result.reason = StopReason::kLambdaLimit;
        break;
      }
    }
  }
  return result;
}

std::vector<std::size_t> gate_outliers(BAProblem& problem, const BAConfig& cfg) {
  std::vector<std::size_t> disabled;
  for (std::size_t i = 0; i < problem.planes.size(); ++i) {
    PlaneFactor& f = problem.planes[i];
    const double normalized = f.plane.residual(problem.points.at(f.point)) / cfg.plane_sigma_eff();
    f.active = normalized * normalized <= cfg.chi2_plane;
    if (!f.active) disabled.push_back(i);
  }
  return disabled;
}

LMResult optimize_planar(BAProblem& problem, const BAConfig& cfg, int max_iterations) {
  LMResult combined;
  const int rounds = std::max(1, cfg.outer_rounds);
  int offset = 0;
  for (int round = 0; round < rounds; ++round) {
    if (!problem.planes.empty()) gate_outliers(problem, cfg);
    LMResult r = optimize_lm(problem, cfg, max_iterations);
    for (TraceRow row : r.trace) {
      row.iteration += offset;
      combined.trace.push_back(row);
    }
    offset += r.iterations + 1;
    combined.iterations += r.iterations;
    combined.reason = r.reason;
    if (problem.planes.empty()) break;
  }
  return combined;
}

void write_back(const BAProblem& problem, SemanticMap& map) {
  for (const auto& [id, pose] : problem.poses)
    if (!problem.fixed.count(id)) map.keyframe(id).pose = pose;
  for (const auto& [id, x] : problem.points) map.point(id).position = x;
}

double mean_plane_residual(const BAProblem& problem) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& f : problem.planes) {
    if (!f.active) continue;
    sum += std::abs(f.plane.residual(problem.points.at(f.point)));
    ++n;
  }
  return n == 0 ? 0.0 : sum / double(n);
}

double rms_reprojection(const BAProblem& problem) {
  double sum = 0.0;
  for (const auto& f : problem.reprojection)
    sum += (project(problem.poses.at(f.keyframe), problem.intrinsics, problem.points.at(f.point)) - f.measured)
               .squaredNorm();
  return problem.reprojection.empty() ? 0.0 : std::sqrt(sum / double(problem.reprojection.size()));
}

void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& trace) {
  out << "iteration,total_cost,reprojection_cost,plane_cost,lambda,accepted\n";
  for (const auto& r : trace)
    out << fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g},{}\n", r.iteration, r.total, r.reprojection, r.plane,
                       r.lambda, r.accepted ? 1 : 0);
}

}  // namespace semplan
