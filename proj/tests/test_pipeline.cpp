#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "semplan/pipeline.hpp"
#include "test_util.hpp"

using namespace semplan;
namespace fs = std::filesystem;

namespace {

// Short version of the default scene so each run stays well under a second.
RunConfig short_config() {
  RunConfig cfg;
  SceneSpec s = default_indoor_scene();
  s.trajectory.frame_count = 12;
  cfg.scene = s;
  cfg.classes = s.classes;
  cfg.keyframe_stride = 2;
  cfg.seeds = {1};
  return cfg;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("noise-free input is reproduced exactly in both modes") {
  RunConfig cfg = short_config();
  cfg.scene->noise = NoiseSpec::Zero();
  // The default sweep is a straight line, and exactly collinear positions have no
  // unique alignment. Bend it so the noise-free estimate can be scored.
  cfg.scene->trajectory.waypoints.insert(cfg.scene->trajectory.waypoints.begin() + 1,
                                         {{2.3, 0.0, 1.7}, {0.0, 0.0, 0.4}});
  cfg.init = {0.0, 0.0, 0.0};
  for (Mode m : {Mode::kPlainBA, Mode::kPlanarBA}) {
    cfg.mode = m;
    const RunReport r = run_pipeline(cfg);
    REQUIRE(r.seeds.size() == 1);
    REQUIRE(r.seeds[0].ate.has_value());
    INFO(to_string(m));
    CHECK(*r.seeds[0].ate <= 1e-9);
    CHECK(r.seeds[0].final_rms_reprojection <= 1e-6);
  }
}

TEST_CASE("without planar priors the planar mode degrades to plain BA") {
  RunConfig cfg = short_config();
  for (ClassId c = 0; c < cfg.classes.size(); ++c) cfg.classes.at(c).planar_prior = false;
  const ModeComparison cmp = compare_modes(cfg);
  const auto& a = cmp.plain.seeds[0];
  const auto& b = cmp.planar.seeds[0];
  CHECK(b.global_ba_runs == 0);
  REQUIRE(a.trajectory.size() == b.trajectory.size());
  for (std::size_t i = 0; i < a.trajectory.size(); ++i)
    CHECK(a.trajectory[i].world_from_camera.matrix() == b.trajectory[i].world_from_camera.matrix());
  CHECK(*a.ate == *b.ate);
  CHECK(cmp.percent_change == 0.0);
}

TEST_CASE("planar mode adds plane factors on the default scene") {
  RunConfig cfg = short_config();
  cfg.mode = Mode::kPlanarBA;
  const RunReport r = run_pipeline(cfg);
  CHECK(r.seeds[0].global_ba_runs >= 1);
  CHECK(!r.seeds[0].planes.empty());
  CHECK(r.seeds[0].keyframes == 6);
}

TEST_CASE("runs are deterministic and artifacts are byte-identical") {
  RunConfig cfg = short_config();
  cfg.seeds = {1, 2};
  const fs::path base = fs::temp_directory_path() / "semplan_test_pipeline";
  fs::remove_all(base);
  const auto m1 = export_artifacts(run_pipeline(cfg), (base / "a").string());
  const auto m2 = export_artifacts(run_pipeline(cfg), (base / "b").string());
  CHECK(m1.size() == 5 + cfg.seeds.size());
  REQUIRE(m1.size() == m2.size());
  for (std::size_t i = 0; i < m1.size(); ++i) {
    CHECK(m1[i].path == m2[i].path);
    CHECK(m1[i].sha256 == m2[i].sha256);
    CHECK(m1[i].bytes == fs::file_size(base / "a" / m1[i].path));
  }
  CHECK(slurp(base / "a" / "manifest.json") == slurp(base / "b" / "manifest.json"));
  CHECK(fs::exists(base / "a" / "trace_seed2.csv"));
}

TEST_CASE("sha256 of a known string") {
  const fs::path p = fs::temp_directory_path() / "semplan_test_sha.txt";
  { std::ofstream(p, std::ios::binary) << "abc"; }
  CHECK(sha256_file(p.string()) == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(test::error_code([] { sha256_file("/nonexistent/x"); }) == ErrorCode::kIo);
}

TEST_CASE("PLY round trip") {
  RunConfig cfg = short_config();
  const RunReport r = run_pipeline(cfg);
  const SemanticMap& map = r.seeds[0].map;
  const fs::path p = fs::temp_directory_path() / "semplan_test_map.ply";
  write_ply(map, p.string());
  const auto verts = read_ply(p.string());
  REQUIRE(verts.size() == map.points().size());
  std::size_t i = 0;
  for (const auto& [id, pt] : map.points()) {
    // Positions are stored as double, so the round trip is exact.
    CHECK(verts[i].position == pt.position);
    CHECK(verts[i].cluster == (pt.cluster ? std::int32_t(*pt.cluster) : -1));
    ++i;
  }
  { std::ofstream(p, std::ios::binary) << "not a ply\n"; }
  CHECK(test::error_code([&] { read_ply(p.string()); }) == ErrorCode::kIo);
}

TEST_CASE("comparison sign convention") {
  RunConfig cfg = short_config();
  const ModeComparison cmp = compare_modes(cfg);
  const double plain = *cmp.plain.median_ate, planar = *cmp.planar.median_ate;
  CHECK(cmp.percent_change == doctest::Approx(100.0 * (plain - planar) / plain).epsilon(1e-12));
  CHECK(comparison_table(cmp).find("planar") != std::string::npos);
  CHECK(comparison_to_json(cmp).find("percent_change") != std::string::npos);
}

TEST_CASE("module errors carry the stage and keyframe") {
  RunConfig cfg = short_config();
  Dataset ds = load_input(cfg, 1);
  ds.points.erase(ds.frames[2].observations.front().track);
  try {
    run_single(ds, cfg, Mode::kPlanarBA, 1);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kIo);
    CHECK(std::string(e.what()).find("ingest (keyframe") != std::string::npos);
  }

  Dataset other = load_input(cfg, 1);
  other.class_names.push_back("sofa");
  CHECK(test::error_code([&] { run_single(other, cfg, Mode::kPlainBA, 1); }) == ErrorCode::kConfig);
}
