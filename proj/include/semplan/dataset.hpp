#pragma once

// In-memory form of a sequence the pipeline consumes. Recorded datasets are read
// from a directory; synthetic scenes are converted to the same structure, so both
// inputs go through one code path.
//
// Directory layout:
//   dataset.json      intrinsics, class names, label confidence, frame list
//   tracks.csv        frame,track_id,u,v
//   points.csv        track_id,x,y,z,descriptor (64 hex digits, bit 255 first)
//   init_poses.txt    TUM trajectory, initial camera-to-world estimate per frame
//   groundtruth.txt   optional TUM trajectory
//   truth.json        optional point -> object map and object planes
//   seg/NNNNNN_label.pgm, seg/NNNNNN_instance.pgm   16-bit binary PGM
//   seg/NNNNNN.prob   optional: u32 W, H, C then W*H*C f32, little endian, class fastest

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "semplan/cluster_map.hpp"
#include "semplan/evaluation.hpp"
#include "semplan/geometry.hpp"
#include "semplan/semantic_fusion.hpp"

namespace semplan {

struct TrackObservation {
  PointId track = 0;
  Pixeld pixel = Pixeld::Zero();
};

struct FrameRecord {
  std::size_t index = 0;
  double timestamp = 0.0;
  /// Initial world-to-camera estimate.
  Pose3d initial_pose;
  std::vector<TrackObservation> observations;
  Image16 labels;
  Image16 instances;
  std::optional<ProbabilityMap> probabilities;
};

struct PointRecord {
  PointId track = 0;
  Eigen::Vector3d initial_position = Eigen::Vector3d::Zero();
  Descriptor descriptor;
};

struct DatasetTruth {
  /// Track -> ground-truth object index (-1 for unstructured points).
  std::map<PointId, int> point_object;
  /// Per object: its plane, if planar.
  std::vector<std::optional<Plane3d>> object_planes;
};

struct Dataset {
  Intrinsics intrinsics;
  std::vector<std::string> class_names;
  /// Confidence used to synthesize probabilities from label images.
  double label_confidence = 0.9;
  std::vector<FrameRecord> frames;
  std::map<PointId, PointRecord> points;
  std::optional<Trajectory> ground_truth;
  std::optional<DatasetTruth> truth;

  /// Probability map for a frame: the stored one or one synthesized from labels.
  ProbabilityMap probabilities(const FrameRecord& frame) const;
};

Dataset read_dataset(const std::string& directory);
void write_dataset(const Dataset& dataset, const std::string& directory);

// Segmentation file formats.
Image16 read_pgm16(const std::string& path);
void write_pgm16(const Image16& image, const std::string& path);
ProbabilityMap read_probability_file(const std::string& path);
void write_probability_file(const ProbabilityMap& map, const std::string& path);

std::string descriptor_to_hex(const Descriptor& d);
Descriptor descriptor_from_hex(const std::string& hex);

}  // namespace semplan
