#include "semplan/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <openssl/evp.h>

#include "json.hpp"
#include "semplan/simulator.hpp"

namespace semplan {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class StageClock {
 public:
  StageClock(std::map<std::string, double>& sink, std::string stage)
      : sink_(sink), stage_(std::move(stage)), start_(std::chrono::steady_clock::now()) {}
  ~StageClock() {
    const auto dt = std::chrono::steady_clock::now() - start_;
    sink_[stage_] += std::chrono::duration<double, std::milli>(dt).count();
  }

 private:
  std::map<std::string, double>& sink_;
  std::string stage_;
  std::chrono::steady_clock::time_point start_;
};

// Runs one stage, timing it and prefixing any module error with where it happened.
template <typename F>
auto stage(std::map<std::string, double>& timings, const std::string& name, KeyframeId kf, F&& body) {
  StageClock clock(timings, name);
  try {
    return body();
  } catch (const Error& e) {
    throw Error(e.code(), fmt::format("{} (keyframe {}): {}", name, kf, e.what()));
  }
}

std::uint64_t ransac_seed(std::uint64_t seed, ClusterId cluster, KeyframeId kf) {
  return seed * 0x9E3779B97F4A7C15ULL ^ (cluster * 0xBF58476D1CE4E5B9ULL + kf);
}

LMResult run_ba(SemanticMap& map, const BAWindow& window, const BAConfig& ba, const Intrinsics& k, int iterations) {
  BAProblem problem = build_problem(map, window, ba, k);
  if (problem.reprojection.empty()) return {};
  LMResult r = optimize_planar(problem, ba, iterations);
  write_back(problem, map);
  return r;
}

// Fits every planar-prior cluster with enough members (refit when it has a plane).
bool fit_planes(SemanticMap& map, const RansacConfig& rc, double kappa, std::uint64_t seed, KeyframeId kf,
                bool only_due) {
  std::vector<ClusterId> ids;
  for (const auto& [id, c] : map.clusters())
    if (c.planar_prior) ids.push_back(id);
  bool accepted_new = false;
  for (ClusterId id : ids) {
    Cluster& c = map.cluster(id);
    if (only_due && !plane_fit_due(c, rc, map.classes())) continue;
    const bool had = c.plane.has_value();
    const bool enough = c.members.size() >= rc.min_inliers_for(map.classes().at(c.cls).name);
    if (enough && fit_cluster_plane(map, id, rc, ransac_seed(seed, id, kf), kappa)) {
      if (!had) accepted_new = true;
    } else if (!only_due && had) {
      // A refit that no longer finds support retires the plane.
      c.plane.reset();
      c.excluded.clear();
      c.inlier_count = 0;
      c.inlier_rms = 0.0;
    }
  }
  return accepted_new;
}

int majority_object(const Cluster& c, const DatasetTruth& truth) {
  std::map<int, std::size_t> votes;
  std::size_t n = 0;
  for (PointId id : c.members) {
    if (c.excluded.count(id)) continue;
    const auto it = truth.point_object.find(id);
    ++n;
    if (it != truth.point_object.end()) ++votes[it->second];
  }
  for (const auto& [obj, v] : votes)
    if (obj >= 0 && 2 * v > n) return obj;
  return -1;
}

void summarize_planes(SeedResult& r, const Dataset& ds) {
  for (const auto& [id, c] : r.map.clusters()) {
    if (!c.plane) continue;
    PlaneRecord p;
    p.cluster = id;
    p.class_name = r.map.classes().at(c.cls).name;
    p.instance = c.instance;
    p.plane = *c.plane;
    p.inlier_count = c.inlier_count;
    p.inlier_rms = c.inlier_rms;
    if (ds.truth) p.truth_object = majority_object(c, *ds.truth);
    r.planes.push_back(p);
  }
  if (!ds.truth) return;
  std::vector<Plane3d> planes;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (const auto& p : r.planes) planes.push_back(p.plane);
  const auto& truth_planes = ds.truth->object_planes;
  const auto truth_plane = [&](int obj) -> const std::optional<Plane3d>& { return truth_planes.at(std::size_t(obj)); };
  for (std::size_t i = 0; i < r.planes.size(); ++i)
    for (std::size_t j = i + 1; j < r.planes.size(); ++j) {
      const int a = r.planes[i].truth_object, b = r.planes[j].truth_object;
      if (a < 0 || b < 0 || a == b || std::size_t(a) >= truth_planes.size() || std::size_t(b) >= truth_planes.size())
        continue;
      if (!truth_plane(a) || !truth_plane(b)) continue;
      if (normal_angle_deg(*truth_plane(a), *truth_plane(b)) < 1e-6) pairs.emplace_back(i, j);
    }
  r.parallel_pairs = pairs.size();
  if (!pairs.empty()) r.parallel_angles = normal_angle_stats(planes, pairs);
}

json plane_json(const PlaneRecord& p) {
  const Eigen::Vector4d c = p.plane.coeffs();
  const Eigen::Vector3d n = p.plane.unitNormal();
  return {{"cluster", p.cluster},
          {"class", p.class_name},
          {"instance", p.instance},
          {"coefficients", {c(0), c(1), c(2), c(3)}},
          {"normal", {n.x(), n.y(), n.z()}},
          {"inlier_count", p.inlier_count},
          {"inlier_rms_m", p.inlier_rms},
          {"truth_object", p.truth_object}};
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json report_json(const RunReport& report) {
  json j;
  j["mode"] = to_string(report.mode);
  j["median_ate_m"] = optional_number(report.median_ate);
  j["seeds"] = json::array();
  for (const auto& s : report.seeds) {
    json e;
    e["seed"] = s.seed;
    e["ate_m"] = optional_number(s.ate);
    e["keyframes"] = s.keyframes;
    e["points"] = s.points;
    e["clusters"] = s.clusters;
    e["global_ba_runs"] = s.global_ba_runs;
    e["final_rms_reprojection_px"] = s.final_rms_reprojection;
    e["planes"] = json::array();
    for (const auto& p : s.planes) e["planes"].push_back(plane_json(p));
    if (s.parallel_angles)
      e["parallel_normal_angles_deg"] = {{"pairs", s.parallel_pairs},
                                         {"max", s.parallel_angles->max_deg},
                                         {"min", s.parallel_angles->min_deg},
                                         {"median", s.parallel_angles->median_deg}};
    else
      e["parallel_normal_angles_deg"] = nullptr;
    if (report.include_timings) e["timings_ms"] = s.timings_ms;
    j["seeds"].push_back(std::move(e));
  }
  j["config"] = report.config_echo.empty() ? json(nullptr) : json::parse(report.config_echo);
  return j;
}

std::array<std::uint8_t, 3> cluster_color(std::int64_t cluster) {
  if (cluster < 0) return {128, 128, 128};
  // Golden-ratio hue walk keeps neighbouring ids visually distinct.
  const double h = std::fmod(double(cluster) * 0.618033988749895, 1.0) * 6.0;
  const int i = int(h);
  const double f = h - i;
  const double v = 230.0, p = 60.0, q = v - (v - p) * f, t = p + (v - p) * f;
  double r = 0, g = 0, b = 0;
  switch (i % 6) {
    case 0: r = v, g = t, b = p; break;
    case 1: r = q, g = v, b = p; break;
    case 2: r = p, g = v, b = t; break;
    case 3: r = p, g = q, b = v; break;
    case 4: r = t, g = p, b = v; break;
    default: r = v, g = p, b = q; break;
  }
  return {std::uint8_t(r), std::uint8_t(g), std::uint8_t(b)};
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + p.string());
  out << text;
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + p.string());
}

template <typename T>
void put_le(std::string& buf, T v) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  buf.append(bytes, sizeof(T));
}

}  // namespace

Dataset load_input(const RunConfig& cfg, std::uint64_t seed) {
  if (cfg.dataset_path) return read_dataset(*cfg.dataset_path);
  if (!cfg.scene) throw Error(ErrorCode::kConfig, "no input source");
  const GroundTruthBundle bundle = generate_scene(*cfg.scene, seed);
  const InitialEstimates init =
      perturb_initialization(bundle, cfg.init.pose_m, cfg.init.pose_deg, cfg.init.point_m, seed);
  return to_dataset(bundle, init);
}

void check_classes(const Dataset& ds, const ClassTable& classes) {
  bool same = int(ds.class_names.size()) == classes.size();
  for (int c = 0; same && c < classes.size(); ++c) same = ds.class_names[std::size_t(c)] == classes.at(c).name;
  if (!same) throw Error(ErrorCode::kConfig, "dataset class list differs from the class table");
}

SeedResult run_single(const Dataset& ds, const RunConfig& cfg, Mode mode, std::uint64_t seed) {
  check_classes(ds, cfg.classes);
  const bool planar = mode == Mode::kPlanarBA;
  BAConfig ba = cfg.ba;
  ba.use_plane_factors = planar;
  const Intrinsics& k = ds.intrinsics;

  SeedResult r;
  r.seed = seed;
  r.map = SemanticMap(cfg.classes);
  SemanticMap& map = r.map;
  auto& timings = r.timings_ms;
  InstanceTrackState tracker;
  std::vector<KeyframeId> order;
  KeyframeId last = 0;

  for (std::size_t i = 0; i < ds.frames.size(); i += cfg.keyframe_stride) {
    const FrameRecord& frame = ds.frames[i];
    const KeyframeId kf = frame.index;
    last = kf;

    stage(timings, "ingest", kf, [&] {
      map.add_keyframe(kf, frame.timestamp, frame.initial_pose);
      for (const auto& o : frame.observations) {
        if (!map.has_point(o.track)) {
          const auto it = ds.points.find(o.track);
          if (it == ds.points.end()) throw Error(ErrorCode::kIo, fmt::format("track {} has no point record", o.track));
          map.add_point(o.track, it->second.initial_position, it->second.descriptor);
        }
        map.add_observation(o.track, kf, o.pixel);
      }
    });
    order.push_back(kf);

    const InstanceMap persistent = stage(timings, "fusion", kf, [&] {
      const ProbabilityMap pmap = ds.probabilities(frame);
      const InstanceMap raw = InstanceMap::FromImage(frame.instances);
      const auto assignment =
          track_instances(tracker, std::int64_t(kf), raw, instance_classes(raw, frame.labels), cfg.tracker);
      InstanceMap ids = relabel(raw, assignment);
      for (const auto& o : frame.observations) {
        try {
          upsert_point_semantics(map, o.track, pmap, ids, o.pixel);
        } catch (const Error& e) {
          if (e.code() != ErrorCode::kOutOfBounds) throw;
        }
      }
      return ids;
    });

    stage(timings, "clustering", kf, [&] {
      for (const auto& o : frame.observations) assign_to_cluster(map, o.track);
      reproject_repair(map, kf, persistent, k, cfg.repair);
      merge_pass(map, cfg.merge);
    });

    bool new_plane = false;
    if (planar)
      new_plane = stage(timings, "plane_fitting", kf,
                        [&] { return fit_planes(map, cfg.ransac, cfg.prune_kappa, seed, kf, true); });

    stage(timings, "windowed_ba", kf, [&] {
      const std::size_t first = order.size() > cfg.window_size ? order.size() - cfg.window_size : 0;
      const std::vector<KeyframeId> window(order.begin() + std::ptrdiff_t(first), order.end());
      r.trace = run_ba(map, BAWindow::Of(window), ba, k, ba.max_iterations).trace;
    });

    if (new_plane) {
      stage(timings, "global_ba", kf, [&] {
        r.trace = run_ba(map, BAWindow::All(), ba, k, ba.max_iterations_global).trace;
        ++r.global_ba_runs;
      });
      stage(timings, "plane_fitting", kf, [&] { fit_planes(map, cfg.ransac, cfg.prune_kappa, seed, kf, false); });
    }
  }
  if (order.empty()) throw Error(ErrorCode::kInvalidArgument, "dataset has no frames");

  if (cfg.final_global_ba) {
    stage(timings, "global_ba", last, [&] {
      r.trace = run_ba(map, BAWindow::All(), ba, k, ba.max_iterations_global).trace;
      ++r.global_ba_runs;
    });
  }
  // Planes for the report; in plain mode this is the only fit.
  stage(timings, "plane_fitting", last, [&] { fit_planes(map, cfg.ransac, cfg.prune_kappa, seed, last + 1, false); });

  for (KeyframeId id : order) {
    const Keyframe& kfr = map.keyframe(id);
    r.trajectory.push_back({kfr.timestamp, kfr.pose.inverse()});
  }
  if (ds.ground_truth) r.ate = ate_rmse(r.trajectory, *ds.ground_truth);
  r.keyframes = order.size();
  r.points = map.points().size();
  r.clusters = map.clusters().size();
  {
    BAConfig plain = ba;
    plain.use_plane_factors = false;
    r.final_rms_reprojection = rms_reprojection(build_problem(map, BAWindow::All(), plain, k));
  }
  summarize_planes(r, ds);
  return r;
}

namespace {

std::optional<double> median_ate(const std::vector<SeedResult>& seeds) {
  std::vector<double> v;
  for (const auto& s : seeds) {
    if (!s.ate) return std::nullopt;
    v.push_back(*s.ate);
  }
  return v.empty() ? std::nullopt : std::optional<double>(median(v));
}

}  // namespace

RunReport run_pipeline(const RunConfig& cfg) {
  cfg.validate();
  RunReport report;
  report.mode = cfg.mode;
  report.config_echo = run_config_to_json(cfg);
  report.include_timings = cfg.include_timings;
  for (std::uint64_t seed : cfg.seeds) {
    const Dataset ds = load_input(cfg, seed);
    report.seeds.push_back(run_single(ds, cfg, cfg.mode, seed));
  }
  report.median_ate = median_ate(report.seeds);
  return report;
}

ModeComparison compare_modes(const RunConfig& cfg) {
  cfg.validate();
  ModeComparison cmp;
  RunConfig plain_cfg = cfg, planar_cfg = cfg;
  plain_cfg.mode = Mode::kPlainBA;
  planar_cfg.mode = Mode::kPlanarBA;
  cmp.plain.mode = Mode::kPlainBA;
  cmp.planar.mode = Mode::kPlanarBA;
  cmp.plain.config_echo = run_config_to_json(plain_cfg);
  cmp.planar.config_echo = run_config_to_json(planar_cfg);
  cmp.plain.include_timings = cmp.planar.include_timings = cfg.include_timings;
  for (std::uint64_t seed : cfg.seeds) {
    const Dataset ds = load_input(cfg, seed);
    cmp.plain.seeds.push_back(run_single(ds, cfg, Mode::kPlainBA, seed));
    cmp.planar.seeds.push_back(run_single(ds, cfg, Mode::kPlanarBA, seed));
    const auto& a = cmp.plain.seeds.back().ate;
    const auto& b = cmp.planar.seeds.back().ate;
    if (a && b && *b < *a) ++cmp.improved;
  }
  cmp.plain.median_ate = median_ate(cmp.plain.seeds);
  cmp.planar.median_ate = median_ate(cmp.planar.seeds);
  if (cmp.plain.median_ate && cmp.planar.median_ate && *cmp.plain.median_ate > 0.0)
    cmp.percent_change = 100.0 * (*cmp.plain.median_ate - *cmp.planar.median_ate) / *cmp.plain.median_ate;
  return cmp;
}

std::string report_to_json(const RunReport& report) { return report_json(report).dump(2) + "\n"; }

std::string comparison_to_json(const ModeComparison& cmp) {
  json j;
  j["seeds"] = json::array();
  for (std::size_t i = 0; i < cmp.plain.seeds.size(); ++i)
    j["seeds"].push_back({{"seed", cmp.plain.seeds[i].seed},
                          {"plain_ate_m", optional_number(cmp.plain.seeds[i].ate)},
                          {"planar_ate_m", optional_number(cmp.planar.seeds[i].ate)}});
  j["median_plain_ate_m"] = optional_number(cmp.plain.median_ate);
  j["median_planar_ate_m"] = optional_number(cmp.planar.median_ate);
  j["percent_change"] = cmp.percent_change;
  j["percent_change_definition"] = "(plain - planar) / plain * 100; positive means planar is better";
  j["improved_seeds"] = cmp.improved;
  return j.dump(2) + "\n";
}

std::string comparison_table(const ModeComparison& cmp) {
  std::string out = fmt::format("{:>6}  {:>14}  {:>14}\n", "seed", "plain ATE (mm)", "planar ATE (mm)");
  const auto mm = [](const std::optional<double>& v) { return v ? fmt::format("{:.4f}", *v * 1e3) : std::string("n/a"); };
  for (std::size_t i = 0; i < cmp.plain.seeds.size(); ++i)
    out += fmt::format("{:>6}  {:>14}  {:>14}\n", cmp.plain.seeds[i].seed, mm(cmp.plain.seeds[i].ate),
                       mm(cmp.planar.seeds[i].ate));
  out += fmt::format("{:>6}  {:>14}  {:>14}\n", "median", mm(cmp.plain.median_ate), mm(cmp.planar.median_ate));
  out += fmt::format("change (plain - planar) / plain: {:+.2f}%, planar better on {}/{} seeds\n", cmp.percent_change,
                     cmp.improved, cmp.plain.seeds.size());
  return out;
}

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path);
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
    EVP_MD_CTX_free(ctx);
    throw Error(ErrorCode::kIo, "sha256 init failed");
  }
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf, std::size_t(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

void write_ply(const SemanticMap& map, const std::string& path) {
  std::string body;
  for (const auto& [id, p] : map.points()) {
    const std::int64_t cluster = p.cluster ? std::int64_t(*p.cluster) : -1;
    const auto color = cluster_color(cluster);
    put_le(body, p.position.x());
    put_le(body, p.position.y());
    put_le(body, p.position.z());
    body.append(reinterpret_cast<const char*>(color.data()), 3);
    put_le(body, std::int32_t(cluster));
  }
  const std::string header = fmt::format(
      "ply\nformat binary_little_endian 1.0\ncomment map points colored by cluster\nelement vertex {}\n"
      "property double x\nproperty double y\nproperty double z\nproperty uchar red\nproperty uchar green\n"
      "property uchar blue\nproperty int cluster\nend_header\n",
      map.points().size());
  write_text(path, header + body);
}

std::vector<PlyVertex> read_ply(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path);
  std::string line;
  std::size_t count = 0;
  std::vector<std::string> props;
  bool little = false;
  if (!std::getline(in, line) || line != "ply") throw Error(ErrorCode::kIo, path + ": not a PLY file");
  while (std::getline(in, line)) {
    if (line == "end_header") break;
    std::istringstream ss(line);
    std::string word;
    ss >> word;
    if (word == "format") {
      std::string fmt_name;
      ss >> fmt_name;
      little = fmt_name == "binary_little_endian";
    } else if (word == "element") {
      std::string name;
      ss >> name >> count;
      if (name != "vertex") throw Error(ErrorCode::kIo, path + ": unexpected element " + name);
    } else if (word == "property") {
      std::string type, name;
      ss >> type >> name;
      props.push_back(type + " " + name);
    }
  }
  const std::vector<std::string> expected = {"double x",     "double y",    "double z",   "uchar red",
                                             "uchar green", "uchar blue", "int cluster"};
  if (!little || props != expected) throw Error(ErrorCode::kIo, path + ": unsupported PLY layout");
  std::vector<PlyVertex> out(count);
  for (auto& v : out) {
    double xyz[3];
    unsigned char rgb[3];
    std::int32_t cluster;
    in.read(reinterpret_cast<char*>(xyz), sizeof(xyz));
    in.read(reinterpret_cast<char*>(rgb), sizeof(rgb));
    in.read(reinterpret_cast<char*>(&cluster), sizeof(cluster));
    if (!in) throw Error(ErrorCode::kIo, path + ": truncated PLY body");
    v.position = {xyz[0], xyz[1], xyz[2]};
    v.r = rgb[0];
    v.g = rgb[1];
    v.b = rgb[2];
    v.cluster = cluster;
  }
  if (in.peek() != std::char_traits<char>::eof()) throw Error(ErrorCode::kIo, path + ": trailing bytes");
  return out;
}

std::vector<ManifestEntry> export_artifacts(const RunReport& report, const std::string& outdir) {
  if (report.seeds.empty()) throw Error(ErrorCode::kInvalidArgument, "report has no seeds");
  const fs::path dir(outdir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + outdir + ": " + ec.message());
  const SeedResult& first = report.seeds.front();
  std::vector<std::string> files;

  {
    std::ostringstream ss;
    write_tum(ss, first.trajectory);
    write_text(dir / "trajectory.txt", ss.str());
    files.push_back("trajectory.txt");
  }
  write_ply(first.map, (dir / "map.ply").string());
  files.push_back("map.ply");
  {
    json planes = json::array();
    for (const auto& p : first.planes) {
      json e = plane_json(p);
      const Cluster& c = first.map.cluster(p.cluster);
      e["members"] = c.members;
      e["excluded"] = c.excluded;
      planes.push_back(std::move(e));
    }
    write_text(dir / "planes.json", json{{"seed", first.seed}, {"planes", planes}}.dump(2) + "\n");
    files.push_back("planes.json");
  }
  {
    json m;
    m["seed"] = first.seed;
    m["keyframes"] = json::array();
    for (const auto& [id, kf] : first.map.keyframes()) {
      const Eigen::Quaterniond& q = kf.pose.rotation();
      const Eigen::Vector3d& t = kf.pose.translation();
      m["keyframes"].push_back({{"id", id},
                                {"timestamp", kf.timestamp},
                                {"camera_from_world", {q.w(), q.x(), q.y(), q.z(), t.x(), t.y(), t.z()}}});
    }
    m["points"] = json::array();
    for (const auto& [id, p] : first.map.points())
      m["points"].push_back({{"id", id},
                             {"position", {p.position.x(), p.position.y(), p.position.z()}},
                             {"class", p.best_class},
                             {"instance", p.instance},
                             {"cluster", p.cluster ? json(*p.cluster) : json(nullptr)},
                             {"observations", p.observations.size()}});
    m["clusters"] = json::array();
    for (const auto& [id, c] : first.map.clusters())
      m["clusters"].push_back({{"id", id},
                               {"class", first.map.classes().at(c.cls).name},
                               {"instance", c.instance},
                               {"planar_prior", c.planar_prior},
                               {"size", c.members.size()},
                               {"excluded", c.excluded.size()},
                               {"has_plane", c.plane.has_value()}});
    write_text(dir / "map.json", m.dump(2) + "\n");
    files.push_back("map.json");
  }
  write_text(dir / "report.json", report_to_json(report));
  files.push_back("report.json");
  for (const auto& s : report.seeds) {
    std::ostringstream ss;
    write_trace_csv(ss, s.trace);
    const std::string name = fmt::format("trace_seed{}.csv", s.seed);
    write_text(dir / name, ss.str());
    files.push_back(name);
  }

  std::vector<ManifestEntry> manifest;
  json mj = json::array();
  for (const auto& f : files) {
    const fs::path p = dir / f;
    ManifestEntry e{f, fs::file_size(p), sha256_file(p.string())};
    mj.push_back({{"path", e.path}, {"bytes", e.bytes}, {"sha256", e.sha256}});
    manifest.push_back(std::move(e));
  }
  write_text(dir / "manifest.json", json{{"files", mj}}.dump(2) + "\n");
  return manifest;
}

}  // namespace semplan
