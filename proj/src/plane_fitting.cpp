#include "semplan/plane_fitting.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/SVD>

namespace semplan {

void RansacConfig::validate() const {
  if (max_iterations < 1) throw Error(ErrorCode::kConfig, "ransac.iterations must be >= 1");
  if (!(threshold_m > 0.0)) throw Error(ErrorCode::kConfig, "ransac.threshold_m must be > 0");
  if (!(confidence > 0.0 && confidence < 1.0)) throw Error(ErrorCode::kConfig, "ransac.confidence must be in (0,1)");
  for (const auto& [name, t] : class_threshold_m)
    if (!(t > 0.0)) throw Error(ErrorCode::kConfig, "class threshold for " + name + " must be > 0");
}

std::size_t RansacConfig::min_inliers_for(const std::string& class_name) const {
  const auto it = class_min_inliers.find(class_name);
  return std::max<std::size_t>(3, it == class_min_inliers.end() ? default_min_inliers : it->second);
}

double RansacConfig::threshold_for(const std::string& class_name) const {
  const auto it = class_threshold_m.find(class_name);
  return it == class_threshold_m.end() ? threshold_m : it->second;
}

Plane3d canonical_plane(const Plane3d& plane) {
  const Eigen::Vector4d& c = plane.coeffs();
  if (c(3) > 1e-12) return plane.flipped();
  if (std::abs(c(3)) <= 1e-12) {
    Eigen::Index idx = 0;
    c.head<3>().cwiseAbs().maxCoeff(&idx);
    if (c(idx) < 0.0) return plane.flipped();
  }
  return plane;
}

Plane3d fit_plane_svd(std::span<const Eigen::Vector3d> points) {
  if (points.size() < 3) throw Error(ErrorCode::kDegenerateGeometry, "plane fit needs at least 3 points");
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const auto& p : points) mean += p;
  mean /= double(points.size());

  Eigen::MatrixXd centered(points.size(), 3);
  for (std::size_t i = 0; i < points.size(); ++i) centered.row(Eigen::Index(i)) = (points[i] - mean).transpose();
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeFullV);
  const Eigen::Vector3d s = svd.singularValues();
  if (s(1) - s(2) < 1e-9) throw Error(ErrorCode::kDegenerateGeometry, "collinear or ill-conditioned points");
  return canonical_plane(Plane3d::FromPointNormal(mean, svd.matrixV().col(2)));
}

namespace {

std::vector<std::size_t> collect_inliers(std::span<const Eigen::Vector3d> points, const Plane3d& plane,
                                         double threshold) {
  std::vector<std::size_t> inliers;
  for (std::size_t i = 0; i < points.size(); ++i)
    if (std::abs(plane.distance(points[i])) <= threshold) inliers.push_back(i);
  return inliers;
}

double inlier_rms(std::span<const Eigen::Vector3d> points, const Plane3d& plane,
                  const std::vector<std::size_t>& inliers) {
  if (inliers.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i : inliers) sum += std::pow(plane.distance(points[i]), 2);
  return std::sqrt(sum / double(inliers.size()));
}

}  // namespace

PlaneFitResult ransac_plane(std::span<const Eigen::Vector3d> points, const RansacConfig& cfg,
                            std::uint64_t seed) {
  cfg.validate();
  const std::size_t n = points.size();
  if (n < 3) throw Error(ErrorCode::kNoModel, "fewer than 3 candidate points");

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);

  std::size_t best_count = 0;
  Eigen::Vector4d best = Eigen::Vector4d::Zero();
  int needed = cfg.max_iterations;
  for (int it = 0; it < needed; ++it) {
    const std::size_t i0 = pick(rng);
    std::size_t i1 = pick(rng);
    while (i1 == i0) i1 = pick(rng);
    std::size_t i2 = pick(rng);
    while (i2 == i0 || i2 == i1) i2 = pick(rng);

    const Eigen::Vector3d cross = (points[i1] - points[i0]).cross(points[i2] - points[i0]);
    const double cn = cross.norm();
    if (!(cn > 1e-12)) continue;
    const Eigen::Vector3d normal = cross / cn;
    const double d = -normal.dot(points[i0]);

    std::size_t count = 0;
    for (const auto& p : points)
      if (std::abs(normal.dot(p) + d) <= cfg.threshold_m) ++count;
    if (count <= best_count) continue;

    best_count = count;
    best << normal, d;
    const double w = double(count) / double(n);
    if (w >= 1.0) {
      needed = it + 1;
    } else {
      const double denom = std::log(1.0 - w * w * w);
      if (denom < 0.0) {
        const double required = std::ceil(std::log(1.0 - cfg.confidence) / denom);
        if (required < double(needed)) needed = std::max(it + 1, int(required));
      }
    }
  }
  if (best_count < 3 + cfg.min_support) throw Error(ErrorCode::kNoModel, "no hypothesis gathered enough support");

  const Plane3d sample_plane = canonical_plane(Plane3d(best));
  PlaneFitResult result{sample_plane, collect_inliers(points, sample_plane, cfg.threshold_m), 0.0};
  std::vector<Eigen::Vector3d> support;
  support.reserve(result.inliers.size());
  for (std::size_t i : result.inliers) support.push_back(points[i]);
  try {
    const Plane3d refit = fit_plane_svd(support);
    std::vector<std::size_t> refit_inliers = collect_inliers(points, refit, cfg.threshold_m);
    if (refit_inliers.size() >= result.inliers.size()) {
      result.plane = refit;
      result.inliers = std::move(refit_inliers);
    }
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kDegenerateGeometry) throw;
  }
  result.rms = inlier_rms(points, result.plane, result.inliers);
  return result;
}

bool accept_plane(const std::string& class_name, const PlaneFitResult& fit, const RansacConfig& cfg) {
  return fit.inliers.size() >= cfg.min_inliers_for(class_name);
}

bool accept_plane(const Cluster& cluster, const PlaneFitResult& fit, const RansacConfig& cfg,
                  const ClassTable& classes) {
  return accept_plane(classes.at(cluster.cls).name, fit, cfg);
}

std::vector<PointId> prune_far_points(SemanticMap& map, ClusterId cluster_id, double kappa) {
  Cluster& cluster = map.cluster(cluster_id);
  std::vector<PointId> removed;
  if (!cluster.plane) return removed;
  const double limit = std::max(kappa * cluster.inlier_rms, kMinPruneDistance);
  for (PointId id : cluster.members) {
    if (cluster.excluded.count(id)) continue;
    if (std::abs(cluster.plane->distance(map.point(id).position)) > limit) removed.push_back(id);
  }
  cluster.excluded.insert(removed.begin(), removed.end());
  return removed;
}

bool plane_fit_due(const Cluster& cluster, const RansacConfig& cfg, const ClassTable& classes,
                   std::size_t retry_growth) {
  if (!cluster.planar_prior || cluster.plane) return false;
  const std::size_t n = cluster.members.size();
  if (n < cfg.min_inliers_for(classes.at(cluster.cls).name)) return false;
  return cluster.size_at_last_fit == 0 || n >= cluster.size_at_last_fit + retry_growth;
}

bool fit_cluster_plane(SemanticMap& map, ClusterId cluster_id, const RansacConfig& cfg, std::uint64_t seed,
                       double kappa) {
  Cluster& cluster = map.cluster(cluster_id);
  const std::string& name = map.classes().at(cluster.cls).name;
  std::vector<Eigen::Vector3d> positions;
  positions.reserve(cluster.members.size());
  for (PointId id : cluster.members) positions.push_back(map.point(id).position);
  cluster.size_at_last_fit = cluster.members.size();

  RansacConfig local = cfg;
  local.threshold_m = cfg.threshold_for(name);
  PlaneFitResult fit;
  try {
    fit = ransac_plane(positions, local, seed);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kNoModel || e.code() == ErrorCode::kDegenerateGeometry) return false;
    throw;
  }
  if (!accept_plane(cluster, fit, cfg, map.classes())) return false;

  cluster.plane = fit.plane;
  cluster.inlier_count = fit.inliers.size();
  cluster.inlier_rms = fit.rms;
  cluster.excluded.clear();
  prune_far_points(map, cluster_id, kappa);
  return true;
}

}  // namespace semplan
