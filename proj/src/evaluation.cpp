#include "semplan/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <Eigen/Geometry>
#include <Eigen/SVD>
#include <fmt/format.h>

namespace semplan {

Trajectory::Trajectory(std::vector<Stamped> samples) {
  for (const auto& s : samples) push_back(s);
}

void Trajectory::push_back(const Stamped& s) {
  if (!samples_.empty() && !(s.timestamp > samples_.back().timestamp))
    throw Error(ErrorCode::kInvalidArgument, "trajectory timestamps must be strictly increasing");
  samples_.push_back(s);
}

Trajectory read_tum(std::istream& in) {
  Trajectory t;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ss(line);
    double ts, tx, ty, tz, qx, qy, qz, qw;
    if (!(ss >> ts >> tx >> ty >> tz >> qx >> qy >> qz >> qw))
      throw Error(ErrorCode::kIo, fmt::format("malformed TUM line {}", lineno));
    t.push_back({ts, Pose3d(Eigen::Quaterniond(qw, qx, qy, qz), Eigen::Vector3d(tx, ty, tz))});
  }
  return t;
}

Trajectory read_tum_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  return read_tum(in);
}

void write_tum(std::ostream& out, const Trajectory& trajectory) {
  for (const auto& s : trajectory.samples()) {
    const Eigen::Vector3d& t = s.world_from_camera.translation();
    const Eigen::Quaterniond& q = s.world_from_camera.rotation();
    out << fmt::format("{:.6f} {:.9f} {:.9f} {:.9f} {:.9f} {:.9f} {:.9f} {:.9f}\n", s.timestamp, t.x(), t.y(), t.z(),
                       q.x(), q.y(), q.z(), q.w());
  }
}

std::vector<std::pair<std::size_t, std::size_t>> associate(const Trajectory& est, const Trajectory& gt,
                                                           double max_dt) {
  if (est.empty() || gt.empty()) throw Error(ErrorCode::kNoMatches, "empty trajectory");
  struct Candidate {
    double dt;
    std::size_t e, g;
  };
  std::vector<Candidate> candidates;
  for (std::size_t i = 0; i < est.size(); ++i) {
    const double ts = est[i].timestamp;
    const auto lo = std::lower_bound(gt.samples().begin(), gt.samples().end(), ts - max_dt,
                                     [](const Stamped& s, double t) { return s.timestamp < t; });
    for (auto it = lo; it != gt.samples().end() && it->timestamp <= ts + max_dt; ++it)
      candidates.push_back({std::abs(it->timestamp - ts), i, std::size_t(it - gt.samples().begin())});
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.dt != b.dt) return a.dt < b.dt;
    if (a.e != b.e) return a.e < b.e;
    return a.g < b.g;
  });
  std::vector<bool> used_e(est.size(), false), used_g(gt.size(), false);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (const auto& c : candidates) {
    if (used_e[c.e] || used_g[c.g]) continue;
    used_e[c.e] = used_g[c.g] = true;
    pairs.emplace_back(c.e, c.g);
  }
  if (pairs.empty()) throw Error(ErrorCode::kNoMatches, "no timestamps within max_dt");
  std::sort(pairs.begin(), pairs.end());
  return pairs;
}

AlignmentResult align_similarity(const Positions& est, const Positions& gt) {
  if (est.size() != gt.size()) throw Error(ErrorCode::kInvalidArgument, "alignment inputs differ in size");
  const std::size_t n = est.size();
  if (n < 3) throw Error(ErrorCode::kDegenerateConfiguration, "need at least 3 pairs");

  Eigen::Matrix3Xd src(3, n), dst(3, n);
  for (std::size_t i = 0; i < n; ++i) {
    src.col(Eigen::Index(i)) = est[i];
    dst.col(Eigen::Index(i)) = gt[i];
  }
  // A rotation about the line through collinear points is unobservable.
  const Eigen::Matrix3Xd centered = src.colwise() - src.rowwise().mean();
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered);
  const Eigen::Vector3d sv = svd.singularValues();
  if (!(sv(0) > 0.0) || sv(1) <= 1e-9 * sv(0))
    throw Error(ErrorCode::kDegenerateConfiguration, "collinear or coincident positions");

  const Eigen::Matrix4d t = Eigen::umeyama(src, dst, true);
  AlignmentResult r;
  const Eigen::Matrix3d sr = t.topLeftCorner<3, 3>();
  r.scale = std::cbrt(sr.determinant());
  r.rotation = sr / r.scale;
  r.translation = t.topRightCorner<3, 1>();
  double sum = 0.0;
  r.residuals.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double e = (r.apply(est[i]) - gt[i]).norm();
    r.residuals.push_back(e);
    sum += e * e;
  }
  r.rmse = std::sqrt(sum / double(n));
  return r;
}

double ate_rmse(const Trajectory& est, const Trajectory& gt, Alignment alignment, double max_dt) {
  const auto pairs = associate(est, gt, max_dt);
  Positions pe, pg;
  for (const auto& [e, g] : pairs) {
    pe.push_back(est[e].world_from_camera.translation());
    pg.push_back(gt[g].world_from_camera.translation());
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < pe.size(); ++i) sum += (pe[i] - pg[i]).squaredNorm();
  const double raw = std::sqrt(sum / double(pe.size()));
  // The identity is one of the candidate similarities, so the aligned optimum never
  // exceeds the raw error. Taking the min keeps identical inputs at exactly 0.
  if (alignment == Alignment::kSimilarity) return std::min(align_similarity(pe, pg).rmse, raw);
  return raw;
}

double normal_angle_deg(const Plane3d& a, const Plane3d& b) {
  const Eigen::Vector3d na = a.unitNormal();
  const Eigen::Vector3d nb = b.unitNormal();
  const double rad = std::atan2(na.cross(nb).norm(), std::abs(na.dot(nb)));
  return rad * 180.0 / M_PI;
}

double median(std::vector<double> values) {
  if (values.empty()) throw Error(ErrorCode::kInvalidArgument, "median of empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

AngleStats normal_angle_stats(std::span<const Plane3d> planes,
                              std::span<const std::pair<std::size_t, std::size_t>> pairs) {
  if (pairs.empty()) throw Error(ErrorCode::kInvalidArgument, "no plane pairs");
  std::vector<double> angles;
  for (const auto& [i, j] : pairs) {
    if (i >= planes.size() || j >= planes.size()) throw Error(ErrorCode::kInvalidArgument, "plane index out of range");
    angles.push_back(normal_angle_deg(planes[i], planes[j]));
  }
  return {*std::max_element(angles.begin(), angles.end()), *std::min_element(angles.begin(), angles.end()),
          median(angles)};
}

}  // namespace semplan
