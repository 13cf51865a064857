#pragma once

// Deterministic synthetic scenes: ground-truth trajectory, planar and clutter
// points, noisy observations and noisy panoptic segmentations.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "semplan/cluster_map.hpp"
#include "semplan/dataset.hpp"
#include "semplan/geometry.hpp"
#include "semplan/semantic_fusion.hpp"

namespace semplan {

struct PlanarObjectSpec {
  std::string class_name;
  Plane3d plane;
  /// Projected onto the plane before use.
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  /// Half-extents along the in-plane axes (meters).
  double half_u = 0.5;
  double half_v = 0.5;
  std::size_t count = 0;
};

struct ClutterSpec {
  /// Empty for unlabeled points (class 0, no instance).
  std::string class_name;
  Eigen::Vector3d box_min = Eigen::Vector3d::Zero();
  Eigen::Vector3d box_max = Eigen::Vector3d::Zero();
  std::size_t count = 0;
};

struct Waypoint {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Vector3d look_at = Eigen::Vector3d::UnitZ();
};

struct TrajectorySpec {
  std::vector<Waypoint> waypoints;
  std::size_t frame_count = 2;
  double frame_rate = 30.0;
};

struct NoiseSpec {
  double pixel_sigma = 0.5;
  double label_error_rate = 0.1;
  double instance_churn_rate = 0.2;
  /// Fraction of planar-object points displaced off their plane.
  double outlier_rate = 0.0;
  double outlier_min_m = 0.05;
  double outlier_max_m = 0.2;
  double descriptor_flip_rate = 0.02;
  double label_confidence = 0.9;

  static NoiseSpec Zero();
};

struct SceneSpec {
  ClassTable classes;
  std::vector<PlanarObjectSpec> planar_objects;
  std::vector<ClutterSpec> clutter;
  Intrinsics intrinsics{525.0, 525.0, 319.5, 239.5, 640, 480};
  TrajectorySpec trajectory;
  NoiseSpec noise;

  /// Throws InvalidSpec.
  void validate() const;
};

struct TruePoint {
  PointId id = 0;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  ClassId cls = 0;
  /// Index into GroundTruthBundle::objects, -1 for unlabeled clutter.
  int object = -1;
  Descriptor descriptor;
  bool displaced = false;
};

struct TrueObject {
  ClassId cls = 0;
  bool structure = false;
  std::optional<Plane3d> plane;
  /// Samples of the object's extent used to rasterize its segment.
  std::vector<Eigen::Vector3d> outline;
};

struct GroundTruthBundle {
  SceneSpec spec;
  std::uint64_t seed = 0;
  std::vector<TruePoint> points;
  std::vector<TrueObject> objects;
  /// World-to-camera per frame.
  std::vector<Pose3d> poses;
  std::vector<double> timestamps;

  Trajectory trajectory() const;
};

GroundTruthBundle generate_scene(const SceneSpec& spec, std::uint64_t seed);

struct RenderedFrame {
  std::vector<TrackObservation> observations;
  Image16 labels;
  InstanceMap instances;
  ProbabilityMap probabilities;
};

RenderedFrame render_frame(const GroundTruthBundle& bundle, std::size_t frame, const NoiseSpec& noise);

struct InitialEstimates {
  /// World-to-camera per frame; frame 0 is left exact.
  std::vector<Pose3d> poses;
  std::vector<Eigen::Vector3d> points;
  std::vector<Descriptor> descriptors;
};

InitialEstimates perturb_initialization(const GroundTruthBundle& bundle, double pose_noise_m, double pose_noise_deg,
                                        double point_noise_m, std::uint64_t seed);

/// Renders every frame and packages bundle + initialization as a Dataset.
Dataset to_dataset(const GroundTruthBundle& bundle, const InitialEstimates& init);

/// Camera looking from `eye` toward `target` with world +z as the up hint.
Pose3d look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target);

/// Desk-scale scene: floor, two planar desk objects and unstructured clutter.
SceneSpec default_indoor_scene();

}  // namespace semplan
