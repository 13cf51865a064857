#pragma once

#include <bitset>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "semplan/geometry.hpp"
#include "semplan/semantic_fusion.hpp"

namespace semplan {

using PointId = std::uint64_t;
using KeyframeId = std::uint64_t;
using ClusterId = std::uint64_t;
using Descriptor = std::bitset<256>;

struct ClassInfo {
  std::string name;
  /// A-priori planar: clusters of this class get a plane fitted.
  bool planar_prior = false;
  /// Panoptic "stuff": one instance-free cluster for the whole class.
  bool structure = false;
  /// Centroid distance below which two clusters of this class may merge (meters).
  double tau_merge = 0.15;
  /// Adds this multiple of the larger cluster radius to tau_merge.
  double merge_radius_scale = 0.0;
};

class ClassTable {
 public:
  ClassTable() = default;
  explicit ClassTable(std::vector<ClassInfo> classes) : classes_(std::move(classes)) {}

  int size() const { return static_cast<int>(classes_.size()); }
  const ClassInfo& at(ClassId c) const { return classes_.at(static_cast<std::size_t>(c)); }
  ClassInfo& at(ClassId c) { return classes_.at(static_cast<std::size_t>(c)); }
  std::optional<ClassId> find(const std::string& name) const;
  const std::vector<ClassInfo>& classes() const { return classes_; }

 private:
  std::vector<ClassInfo> classes_;
};

struct Observation {
  KeyframeId keyframe = 0;
  Pixeld pixel = Pixeld::Zero();
  double weight = 1.0;
};

struct MapPoint {
  PointId id = 0;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  ClassDistribution dist;
  ClassId best_class = 0;
  InstanceId instance = 0;
  Descriptor descriptor;
  std::vector<Observation> observations;
  /// Most recent instance-id observations, newest last.
  std::deque<InstanceId> recent_instances;
  InstanceId repair_candidate = 0;
  int repair_votes = 0;
  std::optional<ClusterId> cluster;
};

struct Keyframe {
  KeyframeId id = 0;
  double timestamp = 0.0;
  /// World-to-camera transform.
  Pose3d pose;
};

struct Cluster {
  ClusterId id = 0;
  ClassId cls = 0;
  /// Persistent instance id; 0 for structure clusters.
  InstanceId instance = 0;
  bool planar_prior = false;
  std::set<PointId> members;
  /// Members pruned from the plane constraint (still members of the partition).
  std::set<PointId> excluded;
  std::optional<Plane3d> plane;
  std::size_t inlier_count = 0;
  double inlier_rms = 0.0;
  /// Member count at the last plane-fit attempt, 0 if never attempted.
  std::size_t size_at_last_fit = 0;
};

/// Points, keyframes and the cluster partition. Single writer.
class SemanticMap {
 public:
  explicit SemanticMap(ClassTable classes) : classes_(std::move(classes)) {}

  const ClassTable& classes() const { return classes_; }

  Keyframe& add_keyframe(KeyframeId id, double timestamp, const Pose3d& pose);
  MapPoint& add_point(PointId id, const Eigen::Vector3d& position, const Descriptor& descriptor);
  void add_observation(PointId point, KeyframeId keyframe, const Pixeld& px, double weight = 1.0);

  bool has_point(PointId id) const { return points_.count(id) != 0; }
  bool has_keyframe(KeyframeId id) const { return keyframes_.count(id) != 0; }
  bool has_cluster(ClusterId id) const { return clusters_.count(id) != 0; }

  MapPoint& point(PointId id);
  const MapPoint& point(PointId id) const;
  Keyframe& keyframe(KeyframeId id);
  const Keyframe& keyframe(KeyframeId id) const;
  Cluster& cluster(ClusterId id);
  const Cluster& cluster(ClusterId id) const;

  const std::map<PointId, MapPoint>& points() const { return points_; }
  const std::map<KeyframeId, Keyframe>& keyframes() const { return keyframes_; }
  const std::map<ClusterId, Cluster>& clusters() const { return clusters_; }
  std::map<KeyframeId, Keyframe>& keyframes() { return keyframes_; }
  std::map<ClusterId, Cluster>& clusters() { return clusters_; }

  /// Follows merge aliases to the surviving persistent id.
  InstanceId resolve_instance(InstanceId id) const;
  void alias_instance(InstanceId from, InstanceId to);

  /// Cluster key (class, instance) a point belongs to, if any.
  std::optional<std::pair<ClassId, InstanceId>> cluster_key(const MapPoint& p) const;
  std::optional<ClusterId> find_cluster(ClassId cls, InstanceId instance) const;
  ClusterId create_cluster(ClassId cls, InstanceId instance);
  void erase_cluster(ClusterId id);

 private:
  ClassTable classes_;
  std::map<KeyframeId, Keyframe> keyframes_;
  std::map<PointId, MapPoint> points_;
  std::map<ClusterId, Cluster> clusters_;
  std::map<std::pair<ClassId, InstanceId>, ClusterId> cluster_index_;
  std::map<InstanceId, InstanceId> aliases_;
  ClusterId next_cluster_ = 1;
};

/// Number of instance-id observations entering the majority vote.
inline constexpr std::size_t kInstanceVoteWindow = 5;

/// Fuses the class probabilities at `px` into a point and updates its instance id.
/// Returns true when the fusion step was degenerate. Throws OutOfBounds (map unchanged).
bool upsert_point_semantics(SemanticMap& map, PointId point, const ProbabilityMap& pmap,
                            const InstanceMap& persistent_ids, const Pixeld& px);

/// Moves a point into the cluster keyed by its class and instance, creating it if needed.
std::optional<ClusterId> assign_to_cluster(SemanticMap& map, PointId point);

Eigen::Vector3d centroid(const Cluster& cluster, const SemanticMap& map);

/// Largest member distance from the centroid.
double cluster_radius(const Cluster& cluster, const SemanticMap& map);

inline constexpr int kDescriptorMatchRadius = 50;

/// Fraction of the smaller cluster's points whose nearest descriptor in the other
/// cluster lies within the Hamming radius.
double descriptor_match_fraction(const Cluster& a, const Cluster& b, const SemanticMap& map,
                                 int radius = kDescriptorMatchRadius);

struct MergeConfig {
  double min_match_fraction = 0.8;
  int hamming_radius = kDescriptorMatchRadius;
};

/// Fuses b into a (or a into b, whichever is older) when centroids are close and
/// descriptors agree. Returns true when a merge happened.
bool try_merge_clusters(SemanticMap& map, ClusterId a, ClusterId b, const MergeConfig& cfg = {});

/// Tries every same-class pair of instance clusters; returns the number of merges.
std::size_t merge_pass(SemanticMap& map, const MergeConfig& cfg = {});

struct RepairConfig {
  int votes_required = 3;
};

/// Projects cluster points into a keyframe's persistent instance map and reassigns
/// points whose segment disagrees for enough consecutive keyframes.
std::size_t reproject_repair(SemanticMap& map, KeyframeId keyframe, const InstanceMap& persistent_ids,
                             const Intrinsics& k, const RepairConfig& cfg = {});

}  // namespace semplan
