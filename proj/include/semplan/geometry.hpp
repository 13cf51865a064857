#pragma once

// SE(3) poses, pinhole projection and homogeneous planes. Everything here is
// templated on the scalar type; the rest of the library uses the `d` aliases.

#include <cmath>
#include <string>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "semplan/errors.hpp"

namespace semplan {

template <typename Scalar>
using Vector2 = Eigen::Matrix<Scalar, 2, 1>;
template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Vector4 = Eigen::Matrix<Scalar, 4, 1>;
template <typename Scalar>
using Vector6 = Eigen::Matrix<Scalar, 6, 1>;
template <typename Scalar>
using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;
template <typename Scalar>
using Matrix4 = Eigen::Matrix<Scalar, 4, 4>;

/// Image coordinates (u, v) in pixels.
template <typename Scalar>
using Pixel = Vector2<Scalar>;

/// Points at or behind this camera-frame depth (meters) do not project.
inline constexpr double kMinDepth = 1e-6;

template <typename Scalar>
Matrix3<Scalar> hat(const Vector3<Scalar>& w) {
  Matrix3<Scalar> m;
  m << Scalar(0), -w.z(), w.y(),
       w.z(), Scalar(0), -w.x(),
       -w.y(), w.x(), Scalar(0);
  return m;
}

/// Rigid transform stored as unit quaternion + translation. Used for the
/// world-to-camera transform of every keyframe.
template <typename Scalar>
class Pose {
 public:
  using Quaternion = Eigen::Quaternion<Scalar>;

  Pose() : rotation_(Quaternion::Identity()), translation_(Vector3<Scalar>::Zero()) {}

  Pose(const Quaternion& rotation, const Vector3<Scalar>& translation)
      : rotation_(rotation.normalized()), translation_(translation) {}

  Pose(const Matrix3<Scalar>& rotation, const Vector3<Scalar>& translation)
      : rotation_(Quaternion(rotation).normalized()), translation_(translation) {}

  static Pose Identity() { return Pose(); }

  const Quaternion& rotation() const { return rotation_; }
  const Vector3<Scalar>& translation() const { return translation_; }
  Matrix3<Scalar> rotationMatrix() const { return rotation_.toRotationMatrix(); }

  Matrix4<Scalar> matrix() const {
    Matrix4<Scalar> m = Matrix4<Scalar>::Identity();
    m.template topLeftCorner<3, 3>() = rotationMatrix();
    m.template topRightCorner<3, 1>() = translation_;
    return m;
  }

  Pose inverse() const {
    const Quaternion inv = rotation_.conjugate();
    return Pose(inv, -(inv * translation_));
  }

  Vector3<Scalar> operator*(const Vector3<Scalar>& x) const { return rotation_ * x + translation_; }

  Pose operator*(const Pose& other) const {
    return Pose(rotation_ * other.rotation_, rotation_ * other.translation_ + translation_);
  }

  template <typename Other>
  Pose<Other> cast() const {
    return Pose<Other>(rotation_.template cast<Other>(), translation_.template cast<Other>());
  }

 private:
  Quaternion rotation_;
  Vector3<Scalar> translation_;
};

template <typename Scalar>
Pose<Scalar> compose(const Pose<Scalar>& a, const Pose<Scalar>& b) {
  return a * b;
}

template <typename Scalar>
Pose<Scalar> inverse(const Pose<Scalar>& p) {
  return p.inverse();
}

/// Exponential map. Tangent layout is (rotation ω, translation ρ).
template <typename Scalar>
Pose<Scalar> se3_exp(const Vector6<Scalar>& xi) {
  using std::cos;
  using std::sin;
  using std::sqrt;
  const Vector3<Scalar> omega = xi.template head<3>();
  const Vector3<Scalar> rho = xi.template tail<3>();
  const Scalar theta2 = omega.squaredNorm();
  const Scalar theta = sqrt(theta2);
  const Matrix3<Scalar> w = hat(omega);
  const Matrix3<Scalar> w2 = w * w;

  Eigen::Quaternion<Scalar> q;
  Matrix3<Scalar> v;
  if (theta < Scalar(1e-8)) {
    q = Eigen::Quaternion<Scalar>(Scalar(1), omega.x() / 2, omega.y() / 2, omega.z() / 2);
    v = Matrix3<Scalar>::Identity() + w / Scalar(2) + w2 / Scalar(6);
  } else {
    q = Eigen::Quaternion<Scalar>(Eigen::AngleAxis<Scalar>(theta, omega / theta));
    v = Matrix3<Scalar>::Identity() + (Scalar(1) - cos(theta)) / theta2 * w +
        (theta - sin(theta)) / (theta2 * theta) * w2;
  }
  return Pose<Scalar>(q.normalized(), v * rho);
}

template <typename Scalar>
Vector3<Scalar> so3_log(const Eigen::Quaternion<Scalar>& rotation) {
  using std::atan2;
  Eigen::Quaternion<Scalar> q = rotation.normalized();
  if (q.w() < Scalar(0)) q.coeffs() = -q.coeffs();
  const Vector3<Scalar> v = q.vec();
  const Scalar n = v.norm();
  if (n < Scalar(1e-10)) return Scalar(2) * v / q.w();
  const Scalar theta = Scalar(2) * atan2(n, q.w());
  return theta / n * v;
}

template <typename Scalar>
Vector6<Scalar> se3_log(const Pose<Scalar>& pose) {
  using std::cos;
  using std::sin;
  using std::sqrt;
  const Vector3<Scalar> omega = so3_log(pose.rotation());
  const Scalar theta2 = omega.squaredNorm();
  const Scalar theta = sqrt(theta2);
  const Matrix3<Scalar> w = hat(omega);
  Matrix3<Scalar> v_inv;
  if (theta < Scalar(1e-8)) {
    v_inv = Matrix3<Scalar>::Identity() - w / Scalar(2) + w * w / Scalar(12);
  } else {
    const Scalar coeff =
        (Scalar(1) - theta * sin(theta) / (Scalar(2) * (Scalar(1) - cos(theta)))) / theta2;
    v_inv = Matrix3<Scalar>::Identity() - w / Scalar(2) + coeff * w * w;
  }
  Vector6<Scalar> xi;
  xi << omega, v_inv * pose.translation();
  return xi;
}

template <typename Scalar>
struct CameraIntrinsics {
  Scalar fx{1}, fy{1}, cx{0}, cy{0};
  int width{0}, height{0};

  void validate() const {
    if (!(fx > Scalar(0)) || !(fy > Scalar(0)))
      throw Error(ErrorCode::kInvalidArgument, "focal lengths must be positive");
    if (!(cx > Scalar(0) && cx < Scalar(width)) || !(cy > Scalar(0) && cy < Scalar(height)))
      throw Error(ErrorCode::kInvalidArgument, "principal point outside the image");
  }

  bool contains(const Pixel<Scalar>& px) const {
    return px.x() >= Scalar(-0.5) && px.y() >= Scalar(-0.5) && px.x() < Scalar(width) - Scalar(0.5) &&
           px.y() < Scalar(height) - Scalar(0.5);
  }
};

/// Pinhole projection of a camera-frame point.
template <typename Scalar>
Pixel<Scalar> project_camera(const CameraIntrinsics<Scalar>& k, const Vector3<Scalar>& xc) {
  if (!(xc.z() > Scalar(kMinDepth)))
    throw Error(ErrorCode::kBehindCamera, "camera-frame depth " + std::to_string(double(xc.z())));
  return Pixel<Scalar>(k.fx * xc.x() / xc.z() + k.cx, k.fy * xc.y() / xc.z() + k.cy);
}

template <typename Scalar>
Pixel<Scalar> project(const Pose<Scalar>& camera_from_world, const CameraIntrinsics<Scalar>& k,
                      const Vector3<Scalar>& xw) {
  return project_camera(k, Vector3<Scalar>(camera_from_world * xw));
}

/// Back-projects a pixel at the given camera-frame depth into world coordinates.
template <typename Scalar>
Vector3<Scalar> unproject(const Pose<Scalar>& camera_from_world, const CameraIntrinsics<Scalar>& k,
                          const Pixel<Scalar>& px, Scalar depth) {
  const Vector3<Scalar> xc((px.x() - k.cx) / k.fx * depth, (px.y() - k.cy) / k.fy * depth, depth);
  return camera_from_world.inverse() * xc;
}

/// Homogeneous plane π = (a, b, c, d) normalized so that ‖π‖₂ = 1.
template <typename Scalar>
class Plane {
 public:
  Plane() : coeffs_(Scalar(0), Scalar(0), Scalar(1), Scalar(0)) {}

  explicit Plane(const Vector4<Scalar>& pi) {
    const Scalar norm = pi.norm();
    if (!(norm > Scalar(0)) || !pi.allFinite())
      throw Error(ErrorCode::kInvalidPlane, "zero or non-finite plane vector");
    coeffs_ = pi / norm;
    if (!(coeffs_.template head<3>().norm() > Scalar(1e-6)))
      throw Error(ErrorCode::kInvalidPlane, "plane at infinity");
  }

  /// Plane through `point` with normal `normal` (any length).
  static Plane FromPointNormal(const Vector3<Scalar>& point, const Vector3<Scalar>& normal) {
    Vector4<Scalar> pi;
    pi << normal, -normal.dot(point);
    return Plane(pi);
  }

  const Vector4<Scalar>& coeffs() const { return coeffs_; }
  Vector3<Scalar> normal() const { return coeffs_.template head<3>(); }
  Vector3<Scalar> unitNormal() const { return normal().normalized(); }
  Scalar offset() const { return coeffs_(3); }

  /// πᵀ(X, 1).
  Scalar residual(const Vector3<Scalar>& x) const { return normal().dot(x) + coeffs_(3); }

  /// Signed distance in meters.
  Scalar distance(const Vector3<Scalar>& x) const { return residual(x) / normal().norm(); }

  /// Same plane expressed after mapping all points through `t`.
  Plane transformed(const Pose<Scalar>& t) const {
    return Plane(t.inverse().matrix().transpose() * coeffs_);
  }

  Plane flipped() const { return Plane(Vector4<Scalar>(-coeffs_)); }

 private:
  Vector4<Scalar> coeffs_;
};

template <typename Scalar>
Scalar point_plane_residual(const Plane<Scalar>& plane, const Vector3<Scalar>& x) {
  return plane.residual(x);
}

template <typename Scalar>
Scalar point_plane_distance(const Plane<Scalar>& plane, const Vector3<Scalar>& x) {
  return plane.distance(x);
}

using Pose3d = Pose<double>;
using Plane3d = Plane<double>;
using Intrinsics = CameraIntrinsics<double>;
using Pixeld = Pixel<double>;
using Vector6d = Vector6<double>;

}  // namespace semplan
