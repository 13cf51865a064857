#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "semplan/config.hpp"
#include "test_util.hpp"

using namespace semplan;

namespace {

std::optional<ErrorCode> parse_code(const std::string& text) {
  return test::error_code([&] { parse_run_config(text).validate(); });
}

}  // namespace

TEST_CASE("modes") {
  CHECK(mode_from_string("plain") == Mode::kPlainBA);
  CHECK(mode_from_string("plain_ba") == Mode::kPlainBA);
  CHECK(mode_from_string("planar") == Mode::kPlanarBA);
  CHECK(mode_from_string("planar_ba") == Mode::kPlanarBA);
  CHECK(test::error_code([] { mode_from_string("fancy"); }) == ErrorCode::kConfig);
  CHECK(mode_from_string(to_string(Mode::kPlainBA)) == Mode::kPlainBA);
}

TEST_CASE("minimal synthetic run config") {
  const RunConfig cfg = parse_run_config(R"({"input": {"scene": {"preset": "default_indoor"}}, "seeds": [3, 4]})");
  CHECK(cfg.scene.has_value());
  CHECK(!cfg.dataset_path.has_value());
  CHECK(cfg.seeds == std::vector<std::uint64_t>{3, 4});
  CHECK(cfg.mode == Mode::kPlanarBA);
  CHECK(cfg.classes.find("keyboard").has_value());
  CHECK(cfg.ba.sigma == 100.0);
  CHECK(cfg.keyframe_stride == 5);
  CHECK(cfg.window_size == 10);
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("overrides reach the sub-configs") {
  const RunConfig cfg = parse_run_config(R"({
    "input": {"scene": {"preset": "default_indoor", "noise": {"pixel_sigma": 0.0}}},
    "mode": "plain",
    "ba": {"sigma": 50, "solver": "dense", "max_iterations": 7},
    "ransac": {"iterations": 99, "threshold_m": 0.02, "class_min_inliers": {"book": 40}},
    "merge": {"min_match_fraction": 0.7},
    "tracker": {"iou_previous": 0.6},
    "repair": {"votes_required": 4},
    "init_noise": {"pose_m": 0.0},
    "keyframe_stride": 2
  })");
  CHECK(cfg.mode == Mode::kPlainBA);
  CHECK(cfg.scene->noise.pixel_sigma == 0.0);
  CHECK(cfg.ba.sigma == 50.0);
  CHECK(cfg.ba.solver == LinearSolver::kDense);
  CHECK(cfg.ba.max_iterations == 7);
  CHECK(cfg.ransac.max_iterations == 99);
  CHECK(cfg.ransac.threshold_m == 0.02);
  CHECK(cfg.ransac.min_inliers_for("book") == 40);
  CHECK(cfg.ransac.min_inliers_for("keyboard") == 50);
  CHECK(cfg.merge.min_match_fraction == 0.7);
  CHECK(cfg.tracker.iou_previous == 0.6);
  CHECK(cfg.repair.votes_required == 4);
  CHECK(cfg.init.pose_m == 0.0);
  CHECK(cfg.keyframe_stride == 2);
}

TEST_CASE("planar priors come from the configured list") {
  const RunConfig cfg =
      parse_run_config(R"({"input": {"scene": {"preset": "default_indoor"}}, "planar_priors": ["book"]})");
  CHECK(cfg.classes.at(*cfg.classes.find("book")).planar_prior);
  CHECK(!cfg.classes.at(*cfg.classes.find("floor")).planar_prior);
  CHECK(!cfg.classes.at(*cfg.classes.find("keyboard")).planar_prior);

  // An unknown class in the planar-prior table is rejected before anything runs.
  CHECK(parse_code(R"({"input": {"scene": {"preset": "default_indoor"}}, "planar_priors": ["sofa"]})") ==
        ErrorCode::kConfig);
}

TEST_CASE("configuration errors") {
  CHECK(parse_code("{") == ErrorCode::kConfig);
  CHECK(parse_code(R"({"input": {}})") == ErrorCode::kConfig);
  CHECK(parse_code(R"({"input": {"scene": {"preset": "default_indoor"}, "dataset": "x"}})") == ErrorCode::kConfig);
  CHECK(parse_code(R"({"input": {"scene": {"preset": "default_indoor"}}, "seeds": []})") == ErrorCode::kConfig);
  CHECK(parse_code(R"({"input": {"scene": {"preset": "default_indoor"}}, "seeds": [1, 1]})") == ErrorCode::kConfig);
  CHECK(parse_code(R"({"input": {"scene": {"preset": "default_indoor"}}, "colour": 1})") == ErrorCode::kConfig);
  CHECK(parse_code(R"({"input": {"scene": {"preset": "default_indoor"}}, "ba": {"sigma": -1}})") == ErrorCode::kConfig);
  CHECK(parse_code(R"({"input": {"scene": {"preset": "default_indoor"}}, "ba": {"sigmaa": 1}})") == ErrorCode::kConfig);
  CHECK(parse_code(R"({"input": {"scene": {"preset": "default_indoor"}}, "ransac": {"confidence": 2}})") ==
        ErrorCode::kConfig);
  CHECK(parse_code(R"({"input": {"scene": {"preset": "default_indoor"}}, "keyframe_stride": 0})") ==
        ErrorCode::kConfig);
  CHECK(parse_code(R"({"input": {"scene": {"preset": "default_indoor"}}, "mode": "x"})") == ErrorCode::kConfig);
  CHECK(parse_code(R"({"input": {"scene": {"preset": "nowhere"}}})") == ErrorCode::kConfig);
  CHECK(test::error_code([] { load_run_config("/nonexistent/run.json"); }) == ErrorCode::kConfig);
}

TEST_CASE("scene spec documents") {
  const SceneSpec s = parse_scene_spec(R"({
    "classes": [{"name": "background"}, {"name": "wall", "planar_prior": true, "structure": true}],
    "intrinsics": {"fx": 400, "fy": 400, "cx": 160, "cy": 120, "width": 320, "height": 240},
    "planar_objects": [{"class": "wall", "plane": [1, 0, 0, -2], "center": [2, 0, 1], "half_extent": [1, 1], "count": 50}],
    "clutter": [{"box_min": [0, 0, 0], "box_max": [1, 1, 1], "count": 5}],
    "trajectory": {"waypoints": [{"position": [0, 0, 1], "look_at": [2, 0, 1]}], "frame_count": 3},
    "noise": {"pixel_sigma": 0.25}
  })");
  CHECK(s.classes.size() == 2);
  CHECK(s.intrinsics.width == 320);
  REQUIRE(s.planar_objects.size() == 1);
  CHECK(s.planar_objects[0].count == 50);
  CHECK(s.planar_objects[0].plane.unitNormal().isApprox(Eigen::Vector3d(1, 0, 0)));
  CHECK(s.clutter[0].class_name.empty());
  CHECK(s.trajectory.frame_count == 3);
  CHECK(s.noise.pixel_sigma == 0.25);

  // Round trip through the canonical JSON. Plane coefficients are renormalized on
  // parse, which may move them by an ulp.
  const SceneSpec again = parse_scene_spec(scene_spec_to_json(s));
  CHECK(test::max_abs_diff(again.planar_objects[0].plane.coeffs(), s.planar_objects[0].plane.coeffs()) < 1e-15);
  SceneSpec same_plane = again;
  same_plane.planar_objects[0].plane = s.planar_objects[0].plane;
  CHECK(scene_spec_to_json(same_plane) == scene_spec_to_json(s));

  CHECK(test::error_code([] { parse_scene_spec(R"({"planar_objects": []})"); }) == ErrorCode::kConfig);
}

TEST_CASE("config echo is canonical") {
  const RunConfig a = parse_run_config(R"({"input": {"scene": {"preset": "default_indoor"}}, "seeds": [1]})");
  const RunConfig b = parse_run_config(R"({"seeds": [1], "input": {"scene": {"preset": "default_indoor"}}})");
  CHECK(run_config_to_json(a) == run_config_to_json(b));
  CHECK(run_config_to_json(a).find("output_dir") == std::string::npos);
}

TEST_CASE("shipped configs load") {
  const std::filesystem::path dir = std::filesystem::path(SEMPLAN_SOURCE_DIR) / "configs";
  std::size_t n = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.path().extension() != ".json") continue;
    ++n;
    INFO(e.path().string());
    if (e.path().filename().string().find("scene") != std::string::npos) {
      CHECK_NOTHROW(load_scene_spec(e.path().string()).validate());
    } else {
      CHECK_NOTHROW(load_run_config(e.path().string()).validate());
    }
  }
  CHECK(n >= 1);
}
