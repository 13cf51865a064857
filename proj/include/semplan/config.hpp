#pragma once

// JSON run configuration and scene descriptions. Every loader reports problems as
// ErrorCode::kConfig so the CLI can tell configuration mistakes from runtime failures.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "semplan/cluster_map.hpp"
#include "semplan/planar_ba.hpp"
#include "semplan/plane_fitting.hpp"
#include "semplan/semantic_fusion.hpp"
#include "semplan/simulator.hpp"

namespace semplan {

enum class Mode { kPlainBA, kPlanarBA };

std::string to_string(Mode mode);
/// Accepts "plain", "plain_ba", "planar", "planar_ba".
Mode mode_from_string(const std::string& s);

/// Perturbation applied to synthetic ground truth to initialize the estimator.
struct InitNoise {
  double pose_m = 0.005;
  double pose_deg = 0.25;
  double point_m = 0.01;
};

struct RunConfig {
  /// Exactly one of these is set.
  std::optional<SceneSpec> scene;
  std::optional<std::string> dataset_path;

  Mode mode = Mode::kPlanarBA;
  ClassTable classes;
  BAConfig ba;
  RansacConfig ransac;
  MergeConfig merge;
  TrackerConfig tracker;
  RepairConfig repair;
  double prune_kappa = kDefaultPruneKappa;
  /// Every Nth dataset frame becomes a keyframe.
  std::size_t keyframe_stride = 5;
  std::size_t window_size = 10;
  InitNoise init;
  /// One extra full BA before evaluation, in both modes. Off by default: the
  /// baseline then runs windowed BA only, as a local-BA SLAM back end does.
  bool final_global_ba = false;
  /// Wall-clock timings make report.json non-reproducible, so they are opt-in.
  bool include_timings = false;
  std::string output_dir = "out";
  std::vector<std::uint64_t> seeds{0};

  /// Throws Config.
  void validate() const;
};

/// Relative paths inside the document resolve against base_dir.
RunConfig parse_run_config(const std::string& text, const std::string& base_dir = ".");
RunConfig load_run_config(const std::string& path);

/// Without a class table the document must carry its own "classes" list.
SceneSpec parse_scene_spec(const std::string& text, const std::optional<ClassTable>& classes = std::nullopt);
SceneSpec load_scene_spec(const std::string& path, const std::optional<ClassTable>& classes = std::nullopt);

ClassTable parse_class_table(const std::string& text);

/// Canonical JSON forms (used for the config echo in reports).
std::string run_config_to_json(const RunConfig& cfg);
std::string scene_spec_to_json(const SceneSpec& spec);

}  // namespace semplan
