#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "semplan/cluster_map.hpp"
#include "semplan/geometry.hpp"

namespace semplan {

struct RansacConfig {
  int max_iterations = 200;
  /// Metric inlier distance (meters).
  double threshold_m = 0.015;
  double confidence = 0.999;
  /// Inliers a hypothesis needs beyond its own three sample points.
  std::size_t min_support = 3;
  std::map<std::string, std::size_t> class_min_inliers = {
      {"keyboard", 50}, {"book", 30}, {"table", 100}, {"floor", 100}, {"road", 150}};
  std::size_t default_min_inliers = 30;
  std::map<std::string, double> class_threshold_m = {{"road", 0.10}};

  void validate() const;
  std::size_t min_inliers_for(const std::string& class_name) const;
  double threshold_for(const std::string& class_name) const;
};

struct PlaneFitResult {
  Plane3d plane;
  /// Indices into the fitted point set.
  std::vector<std::size_t> inliers;
  /// RMS metric distance of the inliers (meters).
  double rms = 0.0;
};

/// Least-squares plane through the centroid; sign fixed so that d <= 0.
Plane3d fit_plane_svd(std::span<const Eigen::Vector3d> points);

/// Sign convention used everywhere: d <= 0, and for d == 0 the largest normal
/// component is positive.
Plane3d canonical_plane(const Plane3d& plane);

/// RANSAC over minimal three-point samples followed by an SVD refit on the inliers.
/// Deterministic for a fixed seed.
PlaneFitResult ransac_plane(std::span<const Eigen::Vector3d> points, const RansacConfig& cfg,
                            std::uint64_t seed);

bool accept_plane(const std::string& class_name, const PlaneFitResult& fit, const RansacConfig& cfg);
bool accept_plane(const Cluster& cluster, const PlaneFitResult& fit, const RansacConfig& cfg,
                  const ClassTable& classes);

inline constexpr double kDefaultPruneKappa = 3.0;

/// Excludes members whose distance to the cluster plane exceeds kappa times the
/// inlier RMS. Returns the newly excluded ids.
std::vector<PointId> prune_far_points(SemanticMap& map, ClusterId cluster, double kappa = kDefaultPruneKappa);

/// Members farther than this are always prunable, whatever the inlier RMS.
inline constexpr double kMinPruneDistance = 1e-6;

/// Points of a cluster whose plane fits should be (re)attempted now.
bool plane_fit_due(const Cluster& cluster, const RansacConfig& cfg, const ClassTable& classes,
                   std::size_t retry_growth = 10);

/// RANSAC on all members of a cluster; on acceptance stores the plane, resets and
/// re-runs pruning. Returns true if a plane was accepted.
bool fit_cluster_plane(SemanticMap& map, ClusterId cluster, const RansacConfig& cfg, std::uint64_t seed,
                       double kappa = kDefaultPruneKappa);

}  // namespace semplan
