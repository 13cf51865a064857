#include <random>

#include "doctest.h"
#include "semplan/geometry.hpp"
#include "test_util.hpp"

using namespace semplan;

namespace {

Intrinsics k500() { return {500.0, 500.0, 320.0, 320.0, 640, 640}; }

Pose3d rot_z(double deg) {
  return Pose3d(Eigen::Quaterniond(Eigen::AngleAxisd(deg * M_PI / 180.0, Eigen::Vector3d::UnitZ())),
                Eigen::Vector3d::Zero());
}

}  // namespace

TEST_CASE("compose with identity and inverse") {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) {
    const Pose3d p = test::random_pose(rng, 2.0);
    CHECK(test::max_abs_diff(compose(Pose3d::Identity(), p).matrix(), p.matrix()) < 1e-12);
    CHECK(test::max_abs_diff(compose(p, inverse(p)).matrix(), Eigen::Matrix4d::Identity()) < 1e-9);
  }
}

TEST_CASE("composition equals the matrix product") {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 100; ++i) {
    const Pose3d a = test::random_pose(rng, 3.0), b = test::random_pose(rng, 3.0);
    CHECK(test::max_abs_diff(compose(a, b).matrix(), a.matrix() * b.matrix()) < 1e-12);
  }
  CHECK(test::max_abs_diff(compose(rot_z(90), rot_z(90)).matrix(), rot_z(180).matrix()) < 1e-12);
}

TEST_CASE("exponential and logarithm") {
  CHECK(test::max_abs_diff(se3_exp(Vector6d::Zero().eval()).matrix(), Eigen::Matrix4d::Identity()) == 0.0);

  Vector6d xi;
  xi << 0.1, 0, 0, 0, 0.2, 0;
  CHECK((se3_log(se3_exp(xi)) - xi).norm() < 1e-12);

  Vector6d t;
  t << 0, 0, 0, 0.3, -1.0, 2.5;
  const Pose3d pure = se3_exp(t);
  CHECK(pure.rotation().angularDistance(Eigen::Quaterniond::Identity()) == 0.0);
  CHECK((pure.translation() - t.tail<3>()).norm() < 1e-15);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    Vector6d x;
    for (int j = 0; j < 6; ++j) x(j) = u(rng);
    x.head<3>() *= 2.9 / std::sqrt(3.0);  // keep |omega| < pi
    CHECK((se3_log(se3_exp(x)) - x).norm() < 1e-9);
  }
  Vector6d tiny;
  tiny << 1e-10, -2e-10, 3e-11, 1e-3, 0, 0;
  CHECK((se3_log(se3_exp(tiny)) - tiny).norm() < 1e-15);
}

TEST_CASE("quaternion stays normalized over long random chains") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 0.3);
  Pose3d p;
  for (int i = 0; i < 1000000; ++i) {
    Vector6d xi;
    for (int j = 0; j < 6; ++j) xi(j) = g(rng);
    p = se3_exp(se3_log(compose(se3_exp(xi), p)));
  }
  CHECK(std::abs(p.rotation().norm() - 1.0) < 1e-9);
  CHECK(test::max_abs_diff(compose(p, inverse(p)).matrix(), Eigen::Matrix4d::Identity()) < 1e-9);
}

TEST_CASE("pinhole projection") {
  const Intrinsics k = k500();
  const Pixeld a = project(Pose3d::Identity(), k, Eigen::Vector3d(0, 0, 2));
  CHECK(a.x() == 320.0);
  CHECK(a.y() == 320.0);
  const Pixeld b = project(Pose3d::Identity(), k, Eigen::Vector3d(0.1, 0, 2));
  CHECK(b.x() == doctest::Approx(345.0));
  CHECK(b.y() == doctest::Approx(320.0));

  const Pose3d back(Eigen::Quaterniond::Identity(), Eigen::Vector3d(0, 0, -1));
  CHECK(test::error_code([&] { project(back, k, Eigen::Vector3d(0, 0, -2)); }) == ErrorCode::kBehindCamera);
  CHECK(test::error_code([&] { project_camera(k, Eigen::Vector3d(0, 0, kMinDepth)); }) == ErrorCode::kBehindCamera);
  CHECK_NOTHROW(project_camera(k, Eigen::Vector3d(0, 0, 2 * kMinDepth)));
}

TEST_CASE("unproject then project round trip") {
  const Intrinsics k = k500();
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 639.0), d(0.1, 50.0);
  for (int i = 0; i < 1000; ++i) {
    const Pose3d pose = test::random_pose(rng, 5.0);
    const Pixeld px(u(rng), u(rng));
    const Eigen::Vector3d x = unproject(pose, k, px, d(rng));
    CHECK((project(pose, k, x) - px).norm() < 1e-9);
  }
}

TEST_CASE("intrinsics validation") {
  CHECK_NOTHROW(k500().validate());
  Intrinsics bad = k500();
  bad.fx = 0;
  CHECK(test::error_code([&] { bad.validate(); }) == ErrorCode::kInvalidArgument);
  bad = k500();
  bad.cx = 640;
  CHECK(test::error_code([&] { bad.validate(); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("plane normalization and residuals") {
  const Plane3d floor(Eigen::Vector4d(0, 0, 1, 0));
  CHECK(point_plane_residual(floor, Eigen::Vector3d(1, 2, 0)) == 0.0);

  const Plane3d p(Eigen::Vector4d(0, 0, 1, -1) / std::sqrt(2.0));
  CHECK(p.coeffs().norm() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(point_plane_residual(p, Eigen::Vector3d(0, 0, 2)) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
  CHECK(point_plane_distance(p, Eigen::Vector3d(0, 0, 2)) == doctest::Approx(1.0).epsilon(1e-12));

  const Plane3d x(Eigen::Vector4d(1, 0, 0, 0));
  CHECK(point_plane_residual(x, Eigen::Vector3d(-0.5, 9, 9)) == doctest::Approx(-0.5).epsilon(1e-15));

  CHECK(test::error_code([] { Plane3d(Eigen::Vector4d::Zero()); }) == ErrorCode::kInvalidPlane);
  CHECK(test::error_code([] { Plane3d(Eigen::Vector4d(0, 0, 0, 1)); }) == ErrorCode::kInvalidPlane);
  CHECK(test::error_code([] { Plane3d(Eigen::Vector4d(1e-9, 0, 0, 1)); }) == ErrorCode::kInvalidPlane);
  CHECK(test::error_code([] { Plane3d(Eigen::Vector4d(NAN, 0, 1, 0)); }) == ErrorCode::kInvalidPlane);
}

TEST_CASE("plane residual is affine in the point") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-1.0, 1.0), w(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const Plane3d p(Eigen::Vector4d(u(rng), u(rng), u(rng) + 2.0, u(rng)));
    const Eigen::Vector3d x1 = 5 * Eigen::Vector3d(u(rng), u(rng), u(rng));
    const Eigen::Vector3d x2 = 5 * Eigen::Vector3d(u(rng), u(rng), u(rng));
    const Eigen::Vector3d x3 = 5 * Eigen::Vector3d(u(rng), u(rng), u(rng));
    const double a = 0.5 * w(rng), b = 0.5 * w(rng);
    const double lhs = p.residual(a * x1 + b * x2 + (1 - a - b) * x3);
    const double rhs = a * p.residual(x1) + b * p.residual(x2) + (1 - a - b) * p.residual(x3);
    CHECK(std::abs(lhs - rhs) < 1e-12);
  }
}

TEST_CASE("transformed plane keeps transformed points on it") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const Eigen::Vector3d n(u(rng), u(rng), u(rng) + 2.0);
    const Eigen::Vector3d c(u(rng), u(rng), u(rng));
    const Plane3d p = Plane3d::FromPointNormal(c, n);
    const Pose3d t = test::random_pose(rng, 3.0);
    const Plane3d q = p.transformed(t);
    Eigen::Vector3d tangent = n.cross(Eigen::Vector3d::UnitX());
    const Eigen::Vector3d on = c + 0.7 * tangent;
    CHECK(std::abs(q.distance(t * on)) < 1e-12);
    CHECK(std::abs(q.coeffs().norm() - 1.0) < 1e-12);
  }
}
