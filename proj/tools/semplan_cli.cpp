// Command-line entry point: run, compare, simulate, eval.
// Exit codes: 0 success, 2 configuration error, 3 runtime failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "semplan/config.hpp"
#include "semplan/pipeline.hpp"
#include "semplan/simulator.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::string mode;
  std::string out;
};

semplan::RunConfig load(const std::string& path, const Overrides& o) {
  semplan::RunConfig cfg = semplan::load_run_config(path);
  if (o.seed) cfg.seeds = {*o.seed};
  if (!o.mode.empty()) cfg.mode = semplan::mode_from_string(o.mode);
  if (!o.out.empty()) cfg.output_dir = o.out;
  cfg.validate();
  return cfg;
}

void print_manifest(const std::vector<semplan::ManifestEntry>& manifest, const std::string& dir) {
  for (const auto& e : manifest) std::cout << fmt::format("  {}  {}  {}\n", e.sha256.substr(0, 16), e.bytes, e.path);
  std::cout << "artifacts written to " << dir << "\n";
}

void print_timings(const semplan::RunReport& r) {
  for (const auto& s : r.seeds) {
    std::string line = fmt::format("seed {} timings (ms):", s.seed);
    for (const auto& [stage, ms] : s.timings_ms) line += fmt::format(" {}={:.1f}", stage, ms);
    std::cerr << line << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semantic planar bundle adjustment"};
  app.require_subcommand(1);

  std::string config;
  Overrides o;
  auto add_common = [&](CLI::App* sub, bool with_mode) {
    sub->add_option("--config", config, "Run configuration (JSON)")->required();
    sub->add_option("--seed", o.seed, "Run a single seed instead of the configured list");
    if (with_mode) sub->add_option("--mode", o.mode, "plain | planar");
    sub->add_option("--out", o.out, "Output directory");
  };

  auto* run = app.add_subcommand("run", "Run the pipeline over the configured seeds and export artifacts");
  add_common(run, true);
  auto* compare = app.add_subcommand("compare", "Run plain and planar BA on the same inputs");
  add_common(compare, false);

  auto* simulate = app.add_subcommand("simulate", "Render a synthetic scene into a dataset directory");
  std::string scene_path;
  std::uint64_t sim_seed = 0;
  std::string sim_out;
  double pose_m = 0.005, pose_deg = 0.25, point_m = 0.01;
  simulate->add_option("--config", scene_path, "Scene description (JSON)")->required();
  simulate->add_option("--seed", sim_seed, "Scene seed");
  simulate->add_option("--out", sim_out, "Dataset directory")->required();
  simulate->add_option("--pose-noise-m", pose_m, "Initial pose position noise (m)");
  simulate->add_option("--pose-noise-deg", pose_deg, "Initial pose rotation noise (deg)");
  simulate->add_option("--point-noise-m", point_m, "Initial point noise (m)");

  auto* eval = app.add_subcommand("eval", "ATE between two TUM trajectories");
  std::string est_path, gt_path;
  double max_dt = semplan::kDefaultMaxDt;
  bool no_align = false;
  eval->add_option("--est", est_path, "Estimated trajectory (TUM)")->required();
  eval->add_option("--gt", gt_path, "Ground-truth trajectory (TUM)")->required();
  eval->add_option("--max-dt", max_dt, "Association tolerance (s)");
  eval->add_flag("--no-align", no_align, "Skip similarity alignment");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) {
      const semplan::RunConfig cfg = load(config, o);
      const semplan::RunReport report = semplan::run_pipeline(cfg);
      for (const auto& s : report.seeds)
        std::cout << fmt::format("seed {}: ATE {} m, {} planes\n", s.seed, s.ate ? fmt::format("{:.6f}", *s.ate) : "n/a",
                                 s.planes.size());
      if (report.median_ate) std::cout << fmt::format("median ATE {:.6f} m\n", *report.median_ate);
      print_timings(report);
      print_manifest(semplan::export_artifacts(report, cfg.output_dir), cfg.output_dir);
    } else if (*compare) {
      const semplan::RunConfig cfg = load(config, o);
      const semplan::ModeComparison cmp = semplan::compare_modes(cfg);
      std::cout << semplan::comparison_table(cmp);
      print_timings(cmp.plain);
      print_timings(cmp.planar);
      const std::filesystem::path dir(cfg.output_dir);
      semplan::export_artifacts(cmp.plain, (dir / "plain").string());
      semplan::export_artifacts(cmp.planar, (dir / "planar").string());
      std::ofstream((dir / "comparison.json").string()) << semplan::comparison_to_json(cmp);
      std::cout << "artifacts written to " << cfg.output_dir << "\n";
    } else if (*simulate) {
      const semplan::SceneSpec spec = semplan::load_scene_spec(scene_path);
      const auto bundle = semplan::generate_scene(spec, sim_seed);
      const auto init = semplan::perturb_initialization(bundle, pose_m, pose_deg, point_m, sim_seed);
      semplan::write_dataset(semplan::to_dataset(bundle, init), sim_out);
      std::cout << fmt::format("{} frames, {} points written to {}\n", bundle.poses.size(), bundle.points.size(),
                               sim_out);
    } else if (*eval) {
      const auto est = semplan::read_tum_file(est_path);
      const auto gt = semplan::read_tum_file(gt_path);
      const auto alignment = no_align ? semplan::Alignment::kNone : semplan::Alignment::kSimilarity;
      std::cout << fmt::format("ATE RMSE {:.9f} m over {} pairs\n", semplan::ate_rmse(est, gt, alignment, max_dt),
                               semplan::associate(est, gt, max_dt).size());
    }
  } catch (const semplan::Error& e) {
    std::cerr << "error [" << semplan::to_string(e.code()) << "]: " << e.what() << "\n";
    const bool config_error = e.code() == semplan::ErrorCode::kConfig || e.code() == semplan::ErrorCode::kInvalidSpec;
    return config_error ? kExitConfig : kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
