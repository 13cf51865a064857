#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <vector>

#include <Eigen/Core>

#include "semplan/geometry.hpp"

namespace semplan {

using ClassId = int;
using InstanceId = std::uint32_t;

/// Lower bound applied to every ingested class probability before renormalizing.
inline constexpr double kProbabilityFloor = 1e-6;

/// Discrete distribution over semantic classes.
class ClassDistribution {
 public:
  ClassDistribution() = default;
  explicit ClassDistribution(Eigen::VectorXd p);

  static ClassDistribution Uniform(int num_classes);
  static ClassDistribution OneHot(int num_classes, ClassId c);

  const Eigen::VectorXd& probabilities() const { return p_; }
  int size() const { return static_cast<int>(p_.size()); }
  double operator[](ClassId c) const { return p_(c); }

 private:
  Eigen::VectorXd p_;
};

struct FusionResult {
  ClassDistribution posterior;
  /// The two inputs had (numerically) disjoint support; posterior is the prior.
  bool degenerate = false;
};

/// One step of recursive Bayesian class fusion: elementwise product, renormalized.
FusionResult bayes_update(const ClassDistribution& prior, const ClassDistribution& observation);

/// Lowest class index among the maximal entries.
ClassId argmax_class(const ClassDistribution& dist);

/// 16-bit single-channel image (label or instance ids), row-major.
struct Image16 {
  int width = 0;
  int height = 0;
  std::vector<std::uint16_t> data;

  Image16() = default;
  Image16(int w, int h, std::uint16_t fill = 0) : width(w), height(h), data(std::size_t(w) * h, fill) {}

  std::uint16_t& at(int u, int v) { return data[std::size_t(v) * width + u]; }
  std::uint16_t at(int u, int v) const { return data[std::size_t(v) * width + u]; }
};

/// Rounds a sub-pixel location to the containing pixel, or returns false when outside.
bool pixel_index(int width, int height, const Pixeld& px, int& u, int& v);

/// Dense per-pixel class probabilities, row-major with the class index fastest.
class ProbabilityMap {
 public:
  ProbabilityMap() = default;
  /// Clamps every entry to kProbabilityFloor and renormalizes each pixel.
  ProbabilityMap(int width, int height, int num_classes, std::vector<double> values);

  /// One-hot with confidence alpha at the labeled class, remainder spread uniformly.
  static ProbabilityMap FromLabels(const Image16& labels, int num_classes, double alpha);

  int width() const { return width_; }
  int height() const { return height_; }
  int numClasses() const { return classes_; }
  double at(int u, int v, ClassId c) const { return values_[index(u, v) + c]; }
  bool contains(const Pixeld& px) const;

  /// Distribution at a sub-pixel location; throws OutOfBounds.
  ClassDistribution distributionAt(const Pixeld& px) const;
  ClassId argmaxAt(int u, int v) const;

  const std::vector<double>& values() const { return values_; }

 private:
  std::size_t index(int u, int v) const { return (std::size_t(v) * width_ + u) * classes_; }

  int width_ = 0;
  int height_ = 0;
  int classes_ = 0;
  std::vector<double> values_;
};

/// Per-pixel instance ids; 0 means no instance.
struct InstanceMap {
  int width = 0;
  int height = 0;
  std::vector<InstanceId> ids;

  InstanceMap() = default;
  InstanceMap(int w, int h) : width(w), height(h), ids(std::size_t(w) * h, 0) {}
  static InstanceMap FromImage(const Image16& image);

  InstanceId& at(int u, int v) { return ids[std::size_t(v) * width + u]; }
  InstanceId at(int u, int v) const { return ids[std::size_t(v) * width + u]; }
  /// Instance id under a sub-pixel location; throws OutOfBounds.
  InstanceId at(const Pixeld& px) const;
};

/// Posterior after observing a point at `px` in a probability map.
FusionResult observe_point(const ClassDistribution& dist, const ProbabilityMap& pmap, const Pixeld& px);

/// Sorted linear pixel indices.
using Mask = std::vector<std::uint32_t>;

double mask_iou(const Mask& a, const Mask& b);

/// Masks of every non-zero instance id.
std::map<InstanceId, Mask> extract_masks(const InstanceMap& map);

/// Majority class under each instance, ties to the lowest class id.
std::map<InstanceId, ClassId> instance_classes(const InstanceMap& instances, const Image16& labels);

struct TrackerConfig {
  double iou_previous = 0.65;
  double iou_second_previous = 0.4;
};

struct TrackedInstance {
  Mask mask;
  ClassId cls = 0;
  InstanceId persistent = 0;
};

struct TrackedFrame {
  std::int64_t frame = 0;
  std::map<InstanceId, TrackedInstance> instances;
};

/// Tracker memory: the last two frames (most recent first) and the id counter.
struct InstanceTrackState {
  std::deque<TrackedFrame> history;
  InstanceId next_id = 1;
};

/// Raw per-frame id -> persistent id.
using TrackAssignment = std::map<InstanceId, InstanceId>;

TrackAssignment track_instances(InstanceTrackState& state, std::int64_t frame, const InstanceMap& raw,
                                const std::map<InstanceId, ClassId>& class_of,
                                const TrackerConfig& cfg = {});

/// Rewrites raw ids through an assignment; unknown ids become 0.
InstanceMap relabel(const InstanceMap& raw, const TrackAssignment& assignment);

}  // namespace semplan
