#include "semplan/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "json.hpp"

namespace semplan {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& msg) { throw Error(ErrorCode::kConfig, msg); }

// Reads fields of one JSON object and rejects keys nobody asked for, so typos in a
// config do not silently fall back to defaults.
class Fields {
 public:
  Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) fail(where_ + ": expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json& at(const std::string& key) {
    if (!j_.contains(key)) fail(fmt::format("{}: missing '{}'", where_, key));
    used_.insert(key);
    return j_.at(key);
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    if (!j_.contains(key)) return;
    used_.insert(key);
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      fail(fmt::format("{}.{}: wrong type", where_, key));
    }
  }

  template <typename T>
  T require(const std::string& key) {
    T out{};
    if (!j_.contains(key)) fail(fmt::format("{}: missing '{}'", where_, key));
    get(key, out);
    return out;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!used_.count(key)) fail(fmt::format("{}: unknown key '{}'", where_, key));
  }

  const std::string& where() const { return where_; }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> used_;
};

Eigen::Vector3d vec3(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) fail(where + ": expected [x, y, z]");
  try {
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
  } catch (const json::exception&) {
    fail(where + ": expected numbers");
  }
}

json to_json(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

json parse_text(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    fail(what + ": " + e.what());
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ClassTable classes_from_json(const json& j) {
  if (!j.is_array() || j.empty()) fail("classes: expected a non-empty list");
  std::vector<ClassInfo> out;
  std::set<std::string> names;
  for (std::size_t i = 0; i < j.size(); ++i) {
    ClassInfo c;
    if (j[i].is_string()) {
      c.name = j[i].get<std::string>();
    } else {
      Fields f(j[i], fmt::format("classes[{}]", i));
      c.name = f.require<std::string>("name");
      f.get("planar_prior", c.planar_prior);
      f.get("structure", c.structure);
      f.get("tau_merge", c.tau_merge);
      f.get("merge_radius_scale", c.merge_radius_scale);
      f.finish();
    }
    if (c.name.empty()) fail("classes: empty class name");
    if (!names.insert(c.name).second) fail("classes: duplicate class '" + c.name + "'");
    if (!(c.tau_merge >= 0.0) || !(c.merge_radius_scale >= 0.0)) fail("classes: merge distances must be >= 0");
    out.push_back(std::move(c));
  }
  return ClassTable(std::move(out));
}

json classes_to_json(const ClassTable& t) {
  json out = json::array();
  for (const auto& c : t.classes())
    out.push_back({{"name", c.name},
                   {"planar_prior", c.planar_prior},
                   {"structure", c.structure},
                   {"tau_merge", c.tau_merge},
                   {"merge_radius_scale", c.merge_radius_scale}});
  return out;
}

void read_intrinsics(const json& j, Intrinsics& k) {
  Fields f(j, "intrinsics");
  f.get("fx", k.fx);
  f.get("fy", k.fy);
  f.get("cx", k.cx);
  f.get("cy", k.cy);
  f.get("width", k.width);
  f.get("height", k.height);
  f.finish();
  try {
    k.validate();
  } catch (const Error& e) {
    fail(std::string("intrinsics: ") + e.what());
  }
}

SceneSpec scene_from_json(const json& j, const std::optional<ClassTable>& classes) {
  Fields f(j, "scene");
  SceneSpec s;
  std::string preset;
  f.get("preset", preset);
  if (preset == "default_indoor") {
    s = default_indoor_scene();
  } else if (!preset.empty()) {
    fail("scene: unknown preset '" + preset + "'");
  }
  if (f.has("classes")) s.classes = classes_from_json(f.at("classes"));
  if (classes) s.classes = *classes;
  if (s.classes.size() == 0) fail("scene: no class table");
  if (f.has("intrinsics")) read_intrinsics(f.at("intrinsics"), s.intrinsics);

  if (f.has("planar_objects")) {
    s.planar_objects.clear();
    const json& list = f.at("planar_objects");
    if (!list.is_array()) fail("scene.planar_objects: expected a list");
    for (std::size_t i = 0; i < list.size(); ++i) {
      Fields o(list[i], fmt::format("scene.planar_objects[{}]", i));
      PlanarObjectSpec p;
      p.class_name = o.require<std::string>("class");
      const auto coeffs = o.require<std::vector<double>>("plane");
      if (coeffs.size() != 4) fail(o.where() + ".plane: expected 4 coefficients");
      try {
        p.plane = Plane3d(Eigen::Vector4d(coeffs[0], coeffs[1], coeffs[2], coeffs[3]));
      } catch (const Error& e) {
        fail(o.where() + ".plane: " + e.what());
      }
      if (o.has("center")) p.center = vec3(o.at("center"), o.where() + ".center");
      const auto half = o.require<std::vector<double>>("half_extent");
      if (half.size() != 2) fail(o.where() + ".half_extent: expected [u, v]");
      p.half_u = half[0];
      p.half_v = half[1];
      p.count = o.require<std::size_t>("count");
      o.finish();
      s.planar_objects.push_back(std::move(p));
    }
  }
  if (f.has("clutter")) {
    s.clutter.clear();
    const json& list = f.at("clutter");
    if (!list.is_array()) fail("scene.clutter: expected a list");
    for (std::size_t i = 0; i < list.size(); ++i) {
      Fields o(list[i], fmt::format("scene.clutter[{}]", i));
      ClutterSpec c;
      o.get("class", c.class_name);
      c.box_min = vec3(o.at("box_min"), o.where() + ".box_min");
      c.box_max = vec3(o.at("box_max"), o.where() + ".box_max");
      c.count = o.require<std::size_t>("count");
      o.finish();
      s.clutter.push_back(std::move(c));
    }
  }
  if (f.has("trajectory")) {
    Fields t(f.at("trajectory"), "scene.trajectory");
    if (t.has("waypoints")) {
      s.trajectory.waypoints.clear();
      const json& list = t.at("waypoints");
      if (!list.is_array()) fail("scene.trajectory.waypoints: expected a list");
      for (std::size_t i = 0; i < list.size(); ++i) {
        Fields w(list[i], fmt::format("scene.trajectory.waypoints[{}]", i));
        s.trajectory.waypoints.push_back(
            {vec3(w.at("position"), w.where() + ".position"), vec3(w.at("look_at"), w.where() + ".look_at")});
        w.finish();
      }
    }
    t.get("frame_count", s.trajectory.frame_count);
    t.get("frame_rate", s.trajectory.frame_rate);
    t.finish();
  }
  if (f.has("noise")) {
    Fields n(f.at("noise"), "scene.noise");
    n.get("pixel_sigma", s.noise.pixel_sigma);
    n.get("label_error_rate", s.noise.label_error_rate);
    n.get("instance_churn_rate", s.noise.instance_churn_rate);
    n.get("outlier_rate", s.noise.outlier_rate);
    n.get("outlier_min_m", s.noise.outlier_min_m);
    n.get("outlier_max_m", s.noise.outlier_max_m);
    n.get("descriptor_flip_rate", s.noise.descriptor_flip_rate);
    n.get("label_confidence", s.noise.label_confidence);
    n.finish();
  }
  f.finish();
  try {
    s.validate();
  } catch (const Error& e) {
    fail(std::string("scene: ") + e.what());
  }
  return s;
}

json scene_to_json(const SceneSpec& s) {
  json j;
  j["classes"] = classes_to_json(s.classes);
  const Intrinsics& k = s.intrinsics;
  j["intrinsics"] = {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}, {"width", k.width}, {"height", k.height}};
  j["planar_objects"] = json::array();
  for (const auto& p : s.planar_objects) {
    const Eigen::Vector4d c = p.plane.coeffs();
    j["planar_objects"].push_back({{"class", p.class_name},
                                   {"plane", {c(0), c(1), c(2), c(3)}},
                                   {"center", to_json(p.center)},
                                   {"half_extent", {p.half_u, p.half_v}},
                                   {"count", p.count}});
  }
  j["clutter"] = json::array();
  for (const auto& c : s.clutter)
    j["clutter"].push_back(
        {{"class", c.class_name}, {"box_min", to_json(c.box_min)}, {"box_max", to_json(c.box_max)}, {"count", c.count}});
  json wps = json::array();
  for (const auto& w : s.trajectory.waypoints)
    wps.push_back({{"position", to_json(w.position)}, {"look_at", to_json(w.look_at)}});
  j["trajectory"] = {
      {"waypoints", wps}, {"frame_count", s.trajectory.frame_count}, {"frame_rate", s.trajectory.frame_rate}};
  const NoiseSpec& n = s.noise;
  j["noise"] = {{"pixel_sigma", n.pixel_sigma},
                {"label_error_rate", n.label_error_rate},
                {"instance_churn_rate", n.instance_churn_rate},
                {"outlier_rate", n.outlier_rate},
                {"outlier_min_m", n.outlier_min_m},
                {"outlier_max_m", n.outlier_max_m},
                {"descriptor_flip_rate", n.descriptor_flip_rate},
                {"label_confidence", n.label_confidence}};
  return j;
}

std::string resolve(const std::string& path, const std::string& base_dir) {
  const fs::path p(path);
  return p.is_absolute() ? p.string() : (fs::path(base_dir) / p).lexically_normal().string();
}

void read_ba(const json& j, BAConfig& ba) {
  Fields f(j, "ba");
  f.get("sigma", ba.sigma);
  f.get("max_iterations", ba.max_iterations);
  f.get("max_iterations_global", ba.max_iterations_global);
  f.get("lambda_init", ba.lambda_init);
  f.get("lambda_up", ba.lambda_up);
  f.get("lambda_down", ba.lambda_down);
  f.get("lambda_max", ba.lambda_max);
  f.get("rel_cost_tol", ba.rel_cost_tol);
  f.get("update_tol", ba.update_tol);
  f.get("huber_reprojection", ba.huber_reprojection);
  f.get("huber_plane", ba.huber_plane);
  f.get("chi2_plane", ba.chi2_plane);
  f.get("pixel_variance", ba.pixel_variance);
  f.get("outer_rounds", ba.outer_rounds);
  std::string solver;
  f.get("solver", solver);
  if (solver == "dense") ba.solver = LinearSolver::kDense;
  else if (solver == "schur" || solver.empty()) ba.solver = LinearSolver::kSchur;
  else fail("ba.solver must be 'schur' or 'dense'");
  f.finish();
}

void read_ransac(const json& j, RansacConfig& r) {
  Fields f(j, "ransac");
  f.get("max_iterations", r.max_iterations);
  f.get("iterations", r.max_iterations);  // short alias
  f.get("threshold_m", r.threshold_m);
  f.get("confidence", r.confidence);
  f.get("min_support", r.min_support);
  f.get("default_min_inliers", r.default_min_inliers);
  // Per-class entries override the built-in table key by key.
  std::map<std::string, std::size_t> mins;
  f.get("class_min_inliers", mins);
  for (const auto& [k, v] : mins) r.class_min_inliers[k] = v;
  std::map<std::string, double> thresholds;
  f.get("class_threshold_m", thresholds);
  for (const auto& [k, v] : thresholds) r.class_threshold_m[k] = v;
  f.finish();
}

}  // namespace

std::string to_string(Mode mode) { return mode == Mode::kPlainBA ? "plain_ba" : "planar_ba"; }

Mode mode_from_string(const std::string& s) {
  if (s == "plain" || s == "plain_ba") return Mode::kPlainBA;
  if (s == "planar" || s == "planar_ba") return Mode::kPlanarBA;
  fail("mode must be 'plain' or 'planar', got '" + s + "'");
}

void RunConfig::validate() const {
  if (bool(scene) == bool(dataset_path)) fail("exactly one input source (scene or dataset) is required");
  if (seeds.empty()) fail("seed list is empty");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) fail("seed list has duplicates");
  if (keyframe_stride < 1) fail("keyframe_stride must be >= 1");
  if (window_size < 2) fail("window_size must be >= 2");
  if (!(prune_kappa > 0.0)) fail("prune_kappa must be > 0");
  if (!(init.pose_m >= 0.0 && init.pose_deg >= 0.0 && init.point_m >= 0.0)) fail("init noise must be >= 0");
  if (classes.size() == 0) fail("class table is empty");
  if (output_dir.empty()) fail("output_dir is empty");
  ba.validate();
  ransac.validate();
  if (!(merge.min_match_fraction >= 0.0 && merge.min_match_fraction <= 1.0))
    fail("merge.min_match_fraction must be in [0, 1]");
  if (merge.hamming_radius < 0 || merge.hamming_radius > 256) fail("merge.hamming_radius must be in [0, 256]");
  if (repair.votes_required < 1) fail("repair.votes_required must be >= 1");
  if (!(tracker.iou_previous >= 0.0 && tracker.iou_previous <= 1.0 && tracker.iou_second_previous >= 0.0 &&
        tracker.iou_second_previous <= 1.0))
    fail("tracker thresholds must be in [0, 1]");
}

ClassTable parse_class_table(const std::string& text) {
  const json j = parse_text(text, "class table");
  if (j.is_object()) {
    Fields f(j, "class table");
    ClassTable t = classes_from_json(f.at("classes"));
    f.finish();
    return t;
  }
  return classes_from_json(j);
}

RunConfig parse_run_config(const std::string& text, const std::string& base_dir) {
  const json j = parse_text(text, "config");
  Fields f(j, "config");
  RunConfig cfg;

  if (f.has("classes") && f.has("class_table")) fail("config: give either 'classes' or 'class_table'");
  if (f.has("classes")) cfg.classes = classes_from_json(f.at("classes"));
  if (f.has("class_table")) cfg.classes = parse_class_table(read_file(resolve(f.require<std::string>("class_table"), base_dir)));

  const json& input = f.at("input");
  {
    Fields in(input, "input");
    if (in.has("scene") == in.has("dataset")) fail("input: exactly one of 'scene' or 'dataset' is required");
    const std::optional<ClassTable> table =
        cfg.classes.size() > 0 ? std::optional<ClassTable>(cfg.classes) : std::nullopt;
    if (in.has("scene")) {
      const json& scene = in.at("scene");
      if (scene.is_string()) {
        cfg.scene = parse_scene_spec(read_file(resolve(scene.get<std::string>(), base_dir)), table);
      } else {
        cfg.scene = scene_from_json(scene, table);
      }
      if (cfg.classes.size() == 0) cfg.classes = cfg.scene->classes;
    } else {
      cfg.dataset_path = resolve(in.require<std::string>("dataset"), base_dir);
    }
    in.finish();
  }

  if (f.has("planar_priors")) {
    const auto names = f.require<std::vector<std::string>>("planar_priors");
    std::set<ClassId> planar;
    for (const auto& n : names) {
      const auto id = cfg.classes.find(n);
      if (!id) fail("planar_priors: unknown class '" + n + "'");
      planar.insert(*id);
    }
    for (ClassId c = 0; c < cfg.classes.size(); ++c) cfg.classes.at(c).planar_prior = planar.count(c) != 0;
  }

  std::string mode;
  f.get("mode", mode);
  if (!mode.empty()) cfg.mode = mode_from_string(mode);
  f.get("seeds", cfg.seeds);
  f.get("keyframe_stride", cfg.keyframe_stride);
  f.get("window_size", cfg.window_size);
  f.get("prune_kappa", cfg.prune_kappa);
  f.get("final_global_ba", cfg.final_global_ba);
  f.get("include_timings", cfg.include_timings);
  f.get("output_dir", cfg.output_dir);
  if (f.has("ba")) read_ba(f.at("ba"), cfg.ba);
  if (f.has("ransac")) read_ransac(f.at("ransac"), cfg.ransac);
  if (f.has("merge")) {
    Fields m(f.at("merge"), "merge");
    m.get("min_match_fraction", cfg.merge.min_match_fraction);
    m.get("hamming_radius", cfg.merge.hamming_radius);
    m.finish();
  }
  if (f.has("tracker")) {
    Fields t(f.at("tracker"), "tracker");
    t.get("iou_previous", cfg.tracker.iou_previous);
    t.get("iou_second_previous", cfg.tracker.iou_second_previous);
    t.finish();
  }
  if (f.has("repair")) {
    Fields r(f.at("repair"), "repair");
    r.get("votes_required", cfg.repair.votes_required);
    r.finish();
  }
  if (f.has("init_noise")) {
    Fields n(f.at("init_noise"), "init_noise");
    n.get("pose_m", cfg.init.pose_m);
    n.get("pose_deg", cfg.init.pose_deg);
    n.get("point_m", cfg.init.point_m);
    n.finish();
  }
  f.finish();
  if (cfg.classes.size() == 0) fail("config: no class table (give 'classes', 'class_table' or scene classes)");
  if (cfg.output_dir.size() && fs::path(cfg.output_dir).is_relative())
    cfg.output_dir = resolve(cfg.output_dir, base_dir);
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  const std::string dir = fs::path(path).parent_path().string();
  return parse_run_config(read_file(path), dir.empty() ? "." : dir);
}

SceneSpec parse_scene_spec(const std::string& text, const std::optional<ClassTable>& classes) {
  return scene_from_json(parse_text(text, "scene"), classes);
}

SceneSpec load_scene_spec(const std::string& path, const std::optional<ClassTable>& classes) {
  return parse_scene_spec(read_file(path), classes);
}

std::string scene_spec_to_json(const SceneSpec& spec) { return scene_to_json(spec).dump(2); }

std::string run_config_to_json(const RunConfig& cfg) {
  json j;
  if (cfg.scene) j["input"] = {{"scene", scene_to_json(*cfg.scene)}};
  else j["input"] = {{"dataset", *cfg.dataset_path}};
  j["mode"] = to_string(cfg.mode);
  j["classes"] = classes_to_json(cfg.classes);
  j["seeds"] = cfg.seeds;
  j["keyframe_stride"] = cfg.keyframe_stride;
  j["window_size"] = cfg.window_size;
  j["prune_kappa"] = cfg.prune_kappa;
  j["final_global_ba"] = cfg.final_global_ba;
  j["include_timings"] = cfg.include_timings;
  const BAConfig& b = cfg.ba;
  j["ba"] = {{"sigma", b.sigma},
             {"max_iterations", b.max_iterations},
             {"max_iterations_global", b.max_iterations_global},
             {"lambda_init", b.lambda_init},
             {"lambda_up", b.lambda_up},
             {"lambda_down", b.lambda_down},
             {"lambda_max", b.lambda_max},
             {"rel_cost_tol", b.rel_cost_tol},
             {"update_tol", b.update_tol},
             {"huber_reprojection", b.huber_reprojection},
             {"huber_plane", b.huber_plane},
             {"chi2_plane", b.chi2_plane},
             {"pixel_variance", b.pixel_variance},
             {"outer_rounds", b.outer_rounds},
             {"solver", b.solver == LinearSolver::kDense ? "dense" : "schur"}};
  const RansacConfig& r = cfg.ransac;
  j["ransac"] = {{"max_iterations", r.max_iterations},
                 {"threshold_m", r.threshold_m},
                 {"confidence", r.confidence},
                 {"min_support", r.min_support},
                 {"default_min_inliers", r.default_min_inliers},
                 {"class_min_inliers", r.class_min_inliers},
                 {"class_threshold_m", r.class_threshold_m}};
  j["merge"] = {{"min_match_fraction", cfg.merge.min_match_fraction}, {"hamming_radius", cfg.merge.hamming_radius}};
  j["tracker"] = {{"iou_previous", cfg.tracker.iou_previous},
                  {"iou_second_previous", cfg.tracker.iou_second_previous}};
  j["repair"] = {{"votes_required", cfg.repair.votes_required}};
  j["init_noise"] = {{"pose_m", cfg.init.pose_m}, {"pose_deg", cfg.init.pose_deg}, {"point_m", cfg.init.point_m}};
  return j.dump(2);
}

}  // namespace semplan
