#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/StdVector>

#include "semplan/geometry.hpp"

namespace semplan {

struct Stamped {
  double timestamp = 0.0;
  /// Camera-to-world pose (TUM convention).
  Pose3d world_from_camera;
};

/// Ordered, strictly increasing timestamps.
class Trajectory {
 public:
  Trajectory() = default;
  explicit Trajectory(std::vector<Stamped> samples);

  void push_back(const Stamped& s);
  const std::vector<Stamped>& samples() const { return samples_; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  const Stamped& operator[](std::size_t i) const { return samples_[i]; }

 private:
  std::vector<Stamped> samples_;
};

/// "timestamp tx ty tz qx qy qz qw" per line; '#' comments and blank lines ignored.
Trajectory read_tum(std::istream& in);
Trajectory read_tum_file(const std::string& path);
void write_tum(std::ostream& out, const Trajectory& trajectory);

inline constexpr double kDefaultMaxDt = 0.02;

/// Greedy nearest-timestamp pairs (est index, gt index), each sample used once.
/// Throws NoMatches.
std::vector<std::pair<std::size_t, std::size_t>> associate(const Trajectory& est, const Trajectory& gt,
                                                           double max_dt = kDefaultMaxDt);

struct AlignmentResult {
  double scale = 1.0;
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  /// |s R est_i + t - gt_i| per pair (meters).
  std::vector<double> residuals;
  double rmse = 0.0;

  Eigen::Vector3d apply(const Eigen::Vector3d& x) const { return scale * rotation * x + translation; }
};

using Positions = std::vector<Eigen::Vector3d>;

/// Closed-form least-squares similarity mapping est onto gt.
/// Throws DegenerateConfiguration for fewer than 3 pairs or collinear inputs.
AlignmentResult align_similarity(const Positions& est, const Positions& gt);

enum class Alignment { kSimilarity, kNone };

/// Root mean squared position error after associating and (by default) aligning.
double ate_rmse(const Trajectory& est, const Trajectory& gt, Alignment alignment = Alignment::kSimilarity,
                double max_dt = kDefaultMaxDt);

struct AngleStats {
  double max_deg = 0.0;
  double min_deg = 0.0;
  double median_deg = 0.0;
};

/// Sign-invariant angle between the plane normals, degrees.
double normal_angle_deg(const Plane3d& a, const Plane3d& b);

/// Throws InvalidArgument for an empty pair list.
AngleStats normal_angle_stats(std::span<const Plane3d> planes,
                              std::span<const std::pair<std::size_t, std::size_t>> pairs);

double median(std::vector<double> values);

}  // namespace semplan
