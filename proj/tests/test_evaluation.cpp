#include <random>
#include <sstream>

#include "doctest.h"
#include "semplan/evaluation.hpp"
#include "test_util.hpp"

using namespace semplan;

namespace {

Trajectory random_trajectory(std::mt19937_64& rng, std::size_t n, double t0 = 0.0) {
  Trajectory t;
  for (std::size_t i = 0; i < n; ++i) t.push_back({t0 + 0.1 * double(i), test::random_pose(rng, 3.0)});
  return t;
}

Trajectory map_positions(const Trajectory& t, double s, const Eigen::Matrix3d& r, const Eigen::Vector3d& x) {
  Trajectory out;
  for (const auto& st : t.samples()) {
    const Pose3d& p = st.world_from_camera;
    out.push_back({st.timestamp, Pose3d(Eigen::Quaterniond(r) * p.rotation(), s * r * p.translation() + x)});
  }
  return out;
}

Positions positions(const Trajectory& t) {
  Positions p;
  for (const auto& s : t.samples()) p.push_back(s.world_from_camera.translation());
  return p;
}

}  // namespace

TEST_CASE("trajectory timestamps must increase") {
  Trajectory t;
  t.push_back({1.0, Pose3d()});
  CHECK(test::error_code([&] { t.push_back({1.0, Pose3d()}); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("association") {
  std::mt19937_64 rng(81);
  const Trajectory a = random_trajectory(rng, 20);
  const auto same = associate(a, a);
  REQUIRE(same.size() == 20);
  for (std::size_t i = 0; i < same.size(); ++i) CHECK(same[i] == std::make_pair(i, i));

  const Trajectory shifted = random_trajectory(rng, 20, 0.01);
  CHECK(associate(shifted, a, 0.02).size() == 20);
  const Trajectory later = random_trajectory(rng, 20, 100.0);
  CHECK(test::error_code([&] { associate(later, a); }) == ErrorCode::kNoMatches);
}

TEST_CASE("similarity alignment recovers exact transforms") {
  std::mt19937_64 rng(82);
  const Trajectory gt = random_trajectory(rng, 30);
  const auto id = align_similarity(positions(gt), positions(gt));
  CHECK(id.scale == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(id.rmse < 1e-12);

  for (int trial = 0; trial < 50; ++trial) {
    const Pose3d g = test::random_pose(rng, 5.0);
    const Eigen::Matrix3d r = g.rotation().toRotationMatrix();
    // est = 2 R gt + t, so the map est -> gt is the inverse similarity.
    const Trajectory est = map_positions(gt, 2.0, r, g.translation());
    const auto a = align_similarity(positions(est), positions(gt));
    CHECK(a.scale == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(test::max_abs_diff(a.rotation, r.transpose()) < 1e-9);
    CHECK(test::max_abs_diff(a.translation, Eigen::Vector3d(-0.5 * r.transpose() * g.translation())) < 1e-9);
    CHECK(a.rmse < 1e-9);
    CHECK(ate_rmse(est, gt) <= 1e-9);
  }
}

TEST_CASE("aligned residuals agree with a direct evaluation") {
  std::mt19937_64 rng(83);
  std::normal_distribution<double> g(0.0, 0.05);
  const Trajectory gt = random_trajectory(rng, 40);
  Positions est = positions(gt);
  for (auto& p : est) p += Eigen::Vector3d(g(rng), g(rng), g(rng));
  const auto a = align_similarity(est, positions(gt));
  const Positions truth = positions(gt);
  double sum = 0.0;
  for (std::size_t i = 0; i < est.size(); ++i) {
    const double e = (a.scale * a.rotation * est[i] + a.translation - truth[i]).norm();
    CHECK(a.residuals[i] == doctest::Approx(e).epsilon(1e-12));
    sum += e * e;
  }
  CHECK(a.rmse == doctest::Approx(std::sqrt(sum / double(est.size()))).epsilon(1e-12));
  // Alignment can only lower the error relative to the raw offsets.
  double raw = 0.0;
  for (std::size_t i = 0; i < est.size(); ++i) raw += (est[i] - truth[i]).squaredNorm();
  CHECK(a.rmse <= std::sqrt(raw / double(est.size())));
  CHECK(a.rotation.determinant() == doctest::Approx(1.0));
  CHECK(a.scale > 0.0);
}

TEST_CASE("degenerate alignments") {
  const Positions line{{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {3, 0, 0}};
  CHECK(test::error_code([&] { align_similarity(line, line); }) == ErrorCode::kDegenerateConfiguration);
  const Positions two{{0, 0, 0}, {1, 0, 0}};
  CHECK(test::error_code([&] { align_similarity(two, two); }) == ErrorCode::kDegenerateConfiguration);
}

TEST_CASE("ate examples") {
  std::mt19937_64 rng(84);
  const Trajectory t = random_trajectory(rng, 100);
  CHECK(ate_rmse(t, t) == 0.0);
  CHECK(ate_rmse(t, t, Alignment::kNone) == 0.0);

  // One frame off by 0.1 m among 99 exact ones, scored without alignment.
  std::vector<Stamped> s = t.samples();
  s[37].world_from_camera = Pose3d(s[37].world_from_camera.rotation(),
                                   s[37].world_from_camera.translation() + Eigen::Vector3d(0, 0.1, 0));
  CHECK(ate_rmse(Trajectory(s), t, Alignment::kNone) == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(ate_rmse(Trajectory(s), t) <= 0.01);
}

TEST_CASE("ate is invariant to similarity transforms of the estimate") {
  std::mt19937_64 rng(85);
  std::normal_distribution<double> g(0.0, 0.02);
  const Trajectory gt = random_trajectory(rng, 50);
  std::vector<Stamped> noisy = gt.samples();
  for (auto& st : noisy)
    st.world_from_camera = Pose3d(st.world_from_camera.rotation(),
                                  st.world_from_camera.translation() + Eigen::Vector3d(g(rng), g(rng), g(rng)));
  const Trajectory est(noisy);
  const double base = ate_rmse(est, gt);
  for (int i = 0; i < 20; ++i) {
    const Pose3d p = test::random_pose(rng, 10.0);
    const double scale = 0.1 + 5.0 * double(i) / 20.0;
    CHECK(std::abs(ate_rmse(map_positions(est, scale, p.rotation().toRotationMatrix(), p.translation()), gt) - base) <=
          1e-9);
  }
}

TEST_CASE("TUM read and write") {
  std::istringstream in("# comment\n\n1.0 1 2 3 0 0 0 1\n2.5 0 0 1 0 0 0.7071067811865476 0.7071067811865476\n");
  const Trajectory t = read_tum(in);
  REQUIRE(t.size() == 2);
  CHECK(t[0].world_from_camera.translation() == Eigen::Vector3d(1, 2, 3));
  CHECK(t[1].timestamp == 2.5);
  std::ostringstream out;
  write_tum(out, t);
  std::istringstream back(out.str());
  const Trajectory u = read_tum(back);
  REQUIRE(u.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(u[i].timestamp == t[i].timestamp);
    CHECK(test::max_abs_diff(u[i].world_from_camera.matrix(), t[i].world_from_camera.matrix()) < 1e-8);
  }
  CHECK(out.str().find("1.0000") != std::string::npos);

  std::istringstream bad("1.0 1 2 3\n");
  CHECK(test::error_code([&] { read_tum(bad); }) == ErrorCode::kIo);
}

TEST_CASE("normal angles") {
  const Plane3d z(Eigen::Vector4d(0, 0, 1, -1));
  const double d = M_PI / 180.0;
  const Plane3d tilted(Eigen::Vector4d(std::sin(d), 0, std::cos(d), 0.3));
  CHECK(normal_angle_deg(z, z) == 0.0);
  CHECK(normal_angle_deg(z, tilted) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(normal_angle_deg(z, tilted.flipped()) == doctest::Approx(1.0).epsilon(1e-9));

  const std::vector<Plane3d> planes{z, tilted, z.flipped()};
  const std::vector<std::pair<std::size_t, std::size_t>> pairs{{0, 1}, {0, 2}, {1, 2}};
  const AngleStats s = normal_angle_stats(planes, pairs);
  CHECK(s.max_deg == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(s.min_deg == doctest::Approx(0.0));
  CHECK(s.median_deg == doctest::Approx(1.0).epsilon(1e-9));
  const std::vector<std::pair<std::size_t, std::size_t>> self{{0, 0}};
  CHECK(normal_angle_stats(planes, self).max_deg == 0.0);
  CHECK(test::error_code([&] { normal_angle_stats(planes, {}); }) == ErrorCode::kInvalidArgument);

  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
}
