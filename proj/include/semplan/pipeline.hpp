#pragma once

// Keyframe loop and experiment drivers.
//
// Per keyframe: ingest observations, fuse semantics and track instances, assign and
// repair clusters, merge duplicates, fit planes on due planar-prior clusters, then
// windowed BA over the most recent keyframes. Each newly accepted plane triggers a
// global planar BA followed by a refit of every plane. Plain mode skips plane fitting
// during the loop and never adds plane factors; it only fits planes at the end for
// the report.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "semplan/config.hpp"
#include "semplan/dataset.hpp"
#include "semplan/evaluation.hpp"
#include "semplan/planar_ba.hpp"

namespace semplan {

struct PlaneRecord {
  ClusterId cluster = 0;
  std::string class_name;
  InstanceId instance = 0;
  Plane3d plane;
  std::size_t inlier_count = 0;
  double inlier_rms = 0.0;
  /// Ground-truth object most members come from, -1 when unknown or mixed.
  int truth_object = -1;
};

struct SeedResult {
  std::uint64_t seed = 0;
  /// Absent when the input carries no ground truth.
  std::optional<double> ate;
  std::size_t keyframes = 0;
  std::size_t points = 0;
  std::size_t clusters = 0;
  std::size_t global_ba_runs = 0;
  std::vector<PlaneRecord> planes;
  /// Angles between estimated planes whose ground-truth planes are parallel.
  std::optional<AngleStats> parallel_angles;
  std::size_t parallel_pairs = 0;
  double final_rms_reprojection = 0.0;
  std::map<std::string, double> timings_ms;
  /// Trace of the last BA run (the final global BA when enabled).
  std::vector<TraceRow> trace;
  /// Estimated camera-to-world keyframe poses.
  Trajectory trajectory;
  SemanticMap map{ClassTable{}};
};

struct RunReport {
  Mode mode = Mode::kPlanarBA;
  std::vector<SeedResult> seeds;
  /// Median of the per-seed ATE values, when all seeds have one.
  std::optional<double> median_ate;
  std::string config_echo;
  bool include_timings = false;
};

/// Dataset for one seed: the recorded dataset, or the synthetic scene rendered and
/// perturbed with that seed.
Dataset load_input(const RunConfig& cfg, std::uint64_t seed);

/// Throws Config when the dataset's class list differs from the class table.
void check_classes(const Dataset& ds, const ClassTable& classes);

SeedResult run_single(const Dataset& ds, const RunConfig& cfg, Mode mode, std::uint64_t seed);

/// Runs cfg.mode over every seed.
RunReport run_pipeline(const RunConfig& cfg);

struct ModeComparison {
  RunReport plain;
  RunReport planar;
  /// (plain - planar) / plain of the median ATE; positive means planar is better.
  double percent_change = 0.0;
  /// Seeds where planar ATE is strictly lower.
  std::size_t improved = 0;
};

/// Both modes over the same per-seed datasets.
ModeComparison compare_modes(const RunConfig& cfg);

std::string report_to_json(const RunReport& report);
std::string comparison_to_json(const ModeComparison& cmp);
/// Human-readable side-by-side table.
std::string comparison_table(const ModeComparison& cmp);

struct ManifestEntry {
  std::string path;
  std::uintmax_t bytes = 0;
  std::string sha256;
};

/// Writes trajectory.txt, map.ply, planes.json, map.json and report.json for the
/// first seed plus trace_seed<N>.csv per seed, then manifest.json listing them.
std::vector<ManifestEntry> export_artifacts(const RunReport& report, const std::string& outdir);

std::string sha256_file(const std::string& path);

struct PlyVertex {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  std::uint8_t r = 0, g = 0, b = 0;
  /// -1 for unclustered points.
  std::int32_t cluster = -1;
};

void write_ply(const SemanticMap& map, const std::string& path);
/// Reads the binary little-endian layout written by write_ply.
std::vector<PlyVertex> read_ply(const std::string& path);

}  // namespace semplan
