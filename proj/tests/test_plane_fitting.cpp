#include <algorithm>
#include <random>

#include "doctest.h"
#include "semplan/plane_fitting.hpp"
#include "test_util.hpp"

using namespace semplan;

namespace {

constexpr double kDeg = M_PI / 180.0;

// Points on the plane through c with normal n, spread over +-extent, plus Gaussian
// noise along n.
std::vector<Eigen::Vector3d> plane_points(std::mt19937_64& rng, const Eigen::Vector3d& n, const Eigen::Vector3d& c,
                                          std::size_t count, double extent, double noise) {
  const Eigen::Vector3d nn = n.normalized();
  const Eigen::Vector3d a = nn.unitOrthogonal(), b = nn.cross(a);
  std::uniform_real_distribution<double> u(-extent, extent);
  std::normal_distribution<double> g(0.0, noise > 0 ? noise : 1.0);
  std::vector<Eigen::Vector3d> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(c + u(rng) * a + u(rng) * b + (noise > 0 ? g(rng) : 0.0) * nn);
  return out;
}

double sq_distance_sum(const Plane3d& p, const std::vector<Eigen::Vector3d>& pts) {
  double s = 0;
  for (const auto& x : pts) s += std::pow(p.distance(x), 2);
  return s;
}

double normal_error_deg(const Plane3d& p, const Eigen::Vector3d& n) {
  return std::acos(std::min(1.0, std::abs(p.normal().normalized().dot(n.normalized())))) / kDeg;
}

ClassTable table() { return ClassTable({{"background"}, {"keyboard", true}, {"floor", true, true}}); }

}  // namespace

TEST_CASE("svd plane examples") {
  const std::vector<Eigen::Vector3d> tri{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  const Plane3d z = fit_plane_svd(tri);
  CHECK(test::max_abs_diff(z.coeffs(), Eigen::Vector4d(0, 0, 1, 0)) < 1e-12);

  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-3, 3);
  std::vector<Eigen::Vector3d> diag;
  for (int i = 0; i < 100; ++i) {
    const double x = u(rng), y = u(rng);
    diag.emplace_back(x, y, 1.0 - x - y);
  }
  CHECK(test::max_abs_diff(fit_plane_svd(diag).coeffs(), Eigen::Vector4d(1, 1, 1, -1) / 2.0) < 1e-9);

  const std::vector<Eigen::Vector3d> line{{0, 0, 0}, {1, 1, 1}, {2, 2, 2}};
  CHECK(test::error_code([&] { fit_plane_svd(line); }) == ErrorCode::kDegenerateGeometry);
}

TEST_CASE("svd plane reproduces generating planes and is locally optimal") {
  std::mt19937_64 rng(32);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Vector3d n(g(rng), g(rng), g(rng));
    const Eigen::Vector3d c(g(rng), g(rng), g(rng));
    const auto exact = plane_points(rng, n, c, 60, 1.0, 0.0);
    const Plane3d fit = fit_plane_svd(exact);
    CHECK(std::abs(fit.normal().normalized().dot(n.normalized())) >= 1 - 1e-12);
    CHECK(fit.coeffs()(3) <= 0.0);
    CHECK(std::abs(fit.coeffs().norm() - 1.0) < 1e-12);
  }
  const auto noisy = plane_points(rng, {0.2, -0.1, 1}, {0, 0, 2}, 200, 1.0, 0.01);
  const Plane3d best = fit_plane_svd(noisy);
  const double base = sq_distance_sum(best, noisy);
  for (int i = 0; i < 1000; ++i) {
    Eigen::Vector4d c = best.coeffs();
    for (int j = 0; j < 4; ++j) c(j) += 1e-3 * g(rng);
    CHECK(sq_distance_sum(Plane3d(c), noisy) >= base);
  }
}

TEST_CASE("canonical sign") {
  CHECK(canonical_plane(Plane3d(Eigen::Vector4d(0, 0, -1, 2))).coeffs()(3) < 0);
  CHECK(canonical_plane(Plane3d(Eigen::Vector4d(0, 0, -1, 0))).coeffs()(2) > 0);
  CHECK(canonical_plane(Plane3d(Eigen::Vector4d(0.1, -0.9, 0, 0))).coeffs()(1) > 0);
}

TEST_CASE("ransac on a clean noisy floor") {
  std::mt19937_64 rng(33);
  const auto pts = plane_points(rng, {0, 0, 1}, {0, 0, 0}, 200, 1.0, 0.001);
  RansacConfig cfg;
  cfg.threshold_m = 0.01;
  const PlaneFitResult r = ransac_plane(pts, cfg, 7);
  // Oracle: the generating plane z = 0.
  CHECK(normal_error_deg(r.plane, {0, 0, 1}) < 0.5);
  CHECK(r.inliers.size() >= 190);
  for (std::size_t i : r.inliers) CHECK(std::abs(r.plane.distance(pts[i])) <= cfg.threshold_m);
  std::vector<bool> in(pts.size(), false);
  for (std::size_t i : r.inliers) in[i] = true;
  for (std::size_t i = 0; i < pts.size(); ++i)
    if (!in[i]) CHECK(std::abs(r.plane.distance(pts[i])) > cfg.threshold_m);
}

TEST_CASE("ransac with 30 percent outliers") {
  int good = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed + 100);
    const Eigen::Vector3d n(0.3, -0.2, 1.0);
    auto pts = plane_points(rng, n, {0.5, 0.5, 0.5}, 140, 0.5, 0.002);
    std::uniform_real_distribution<double> cube(0, 1);
    for (int i = 0; i < 60; ++i) pts.emplace_back(cube(rng), cube(rng), cube(rng));
    const PlaneFitResult r = ransac_plane(pts, RansacConfig{}, seed);
    if (normal_error_deg(r.plane, n) < 1.0) ++good;
  }
  CHECK(good >= 19);
}

TEST_CASE("ransac reports no model on scattered points") {
  RansacConfig cfg;
  cfg.threshold_m = 0.001;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<Eigen::Vector3d> pts;
    for (int i = 0; i < 10; ++i) pts.emplace_back(u(rng), u(rng), u(rng));
    CHECK(test::error_code([&] { ransac_plane(pts, cfg, seed); }) == ErrorCode::kNoModel);
  }
  CHECK(test::error_code([&] { ransac_plane(std::vector<Eigen::Vector3d>{{0, 0, 0}}, cfg, 0); }) ==
        ErrorCode::kNoModel);
}

TEST_CASE("ransac is deterministic") {
  std::mt19937_64 rng(34);
  auto pts = plane_points(rng, {1, 2, 3}, {0, 0, 1}, 150, 1.0, 0.005);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int i = 0; i < 50; ++i) pts.emplace_back(u(rng), u(rng), u(rng));
  const auto a = ransac_plane(pts, RansacConfig{}, 99), b = ransac_plane(pts, RansacConfig{}, 99);
  CHECK(a.plane.coeffs() == b.plane.coeffs());
  CHECK(a.inliers == b.inliers);
  CHECK(a.rms == b.rms);
}

TEST_CASE("acceptance thresholds per class") {
  RansacConfig cfg;
  PlaneFitResult fit;
  fit.inliers.resize(49);
  CHECK(!accept_plane("keyboard", fit, cfg));
  fit.inliers.resize(50);
  CHECK(accept_plane("keyboard", fit, cfg));
  fit.inliers.resize(120);
  CHECK(accept_plane("floor", fit, cfg));
  fit.inliers.resize(99);
  CHECK(!accept_plane("floor", fit, cfg));
  CHECK(cfg.min_inliers_for("book") == 30);
  CHECK(cfg.min_inliers_for("unknown") == cfg.default_min_inliers);
  CHECK(cfg.threshold_for("road") == 0.10);

  RansacConfig bad;
  bad.max_iterations = 0;
  CHECK(test::error_code([&] { bad.validate(); }) == ErrorCode::kConfig);
  bad = RansacConfig{};
  bad.confidence = 1.0;
  CHECK(test::error_code([&] { bad.validate(); }) == ErrorCode::kConfig);
}

TEST_CASE("far point pruning") {
  std::mt19937_64 rng(35);
  SemanticMap m(table());
  const auto pts = plane_points(rng, {0, 0, 1}, {0, 0, 1}, 60, 0.2, 0.002);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    MapPoint& p = m.add_point(i, pts[i], {});
    p.best_class = 1;
    p.instance = 3;
    assign_to_cluster(m, i);
  }
  const ClusterId cid = *m.point(0).cluster;
  REQUIRE(fit_cluster_plane(m, cid, RansacConfig{}, 1));
  Cluster& c = m.cluster(cid);
  CHECK(c.inlier_count >= 50);
  CHECK(c.inlier_count <= c.members.size());

  // Nothing removed when every member is within kappa * rms, and a second call is a no-op.
  c.excluded.clear();
  const double rms = c.inlier_rms;
  std::vector<PointId> first = prune_far_points(m, cid, 1e9);
  CHECK(first.empty());

  // One member moved to 10x rms: exactly that one goes.
  const Eigen::Vector3d n = c.plane->normal().normalized();
  const Eigen::Vector3d x0 = m.point(5).position;
  m.point(5).position = x0 - c.plane->distance(x0) * n + 10 * rms * n;
  c.excluded.clear();
  const auto removed = prune_far_points(m, cid, 3.0);
  CHECK(std::count(removed.begin(), removed.end(), PointId{5}) == 1);
  for (PointId id : removed) CHECK(std::abs(c.plane->distance(m.point(id).position)) > 3.0 * rms);
  CHECK(prune_far_points(m, cid, 3.0).empty());
  CHECK(c.members.count(5) == 1);
  CHECK(m.has_point(5));
}

TEST_CASE("plane fit cadence") {
  SemanticMap m(table());
  std::mt19937_64 rng(36);
  const auto pts = plane_points(rng, {0, 0, 1}, {0, 0, 0}, 49, 0.2, 0.0);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    MapPoint& p = m.add_point(i, pts[i], {});
    p.best_class = 1;
    p.instance = 1;
    assign_to_cluster(m, i);
  }
  Cluster& c = m.cluster(*m.point(0).cluster);
  const RansacConfig cfg;
  CHECK(!plane_fit_due(c, cfg, m.classes()));
  c.members.insert(1000);
  CHECK(plane_fit_due(c, cfg, m.classes()));
  c.size_at_last_fit = 50;
  CHECK(!plane_fit_due(c, cfg, m.classes()));
  for (PointId i = 1001; i < 1010; ++i) c.members.insert(i);
  CHECK(!plane_fit_due(c, cfg, m.classes()));
  c.members.insert(1010);
  CHECK(plane_fit_due(c, cfg, m.classes()));
  c.plane = Plane3d(Eigen::Vector4d(0, 0, 1, 0));
  CHECK(!plane_fit_due(c, cfg, m.classes()));
}
