#include "semplan/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace semplan {

namespace {

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0) {
  std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(stream), std::uint32_t(index),
                    std::uint32_t(index >> 32)};
  return std::mt19937_64(seq);
}

enum Stream : std::uint64_t { kScene = 1, kRender = 2, kChurn = 3, kInit = 4 };

bool in_unit(double x) { return x >= 0.0 && x <= 1.0; }

ClassId class_id(const ClassTable& classes, const std::string& name) {
  const auto id = classes.find(name);
  if (!id) throw Error(ErrorCode::kInvalidSpec, "unknown class '" + name + "'");
  return *id;
}

void in_plane_axes(const Eigen::Vector3d& n, Eigen::Vector3d& u, Eigen::Vector3d& v) {
  const Eigen::Vector3d ref = std::abs(n.x()) < 0.9 ? Eigen::Vector3d::UnitX() : Eigen::Vector3d::UnitY();
  u = n.cross(ref).normalized();
  v = n.cross(u);
}

Descriptor random_descriptor(std::mt19937_64& rng) {
  Descriptor d;
  for (int word = 0; word < 4; ++word) {
    const std::uint64_t bits = rng();
    for (int b = 0; b < 64; ++b)
      if ((bits >> b) & 1U) d.set(std::size_t(word * 64 + b));
  }
  return d;
}

Pose3d interpolate(const Pose3d& a, const Pose3d& b, double alpha) {
  // Interpolate the camera-to-world motion: linear centers, geodesic rotation.
  const Pose3d wa = a.inverse();
  const Pose3d wb = b.inverse();
  const Eigen::Quaterniond q = wa.rotation().slerp(alpha, wb.rotation());
  const Eigen::Vector3d c = (1.0 - alpha) * wa.translation() + alpha * wb.translation();
  return Pose3d(q, c).inverse();
}

std::size_t visible_points(const GroundTruthBundle& b, const Pose3d& pose) {
  std::size_t n = 0;
  for (const auto& p : b.points) {
    const Eigen::Vector3d xc = pose * p.position;
    if (!(xc.z() > kMinDepth)) continue;
    if (b.spec.intrinsics.contains(project_camera(b.spec.intrinsics, xc))) ++n;
  }
  return n;
}

}  // namespace

NoiseSpec NoiseSpec::Zero() {
  NoiseSpec n;
  n.pixel_sigma = 0.0;
  n.label_error_rate = 0.0;
  n.instance_churn_rate = 0.0;
  n.outlier_rate = 0.0;
  n.descriptor_flip_rate = 0.0;
  n.label_confidence = 1.0;
  return n;
}

void SceneSpec::validate() const {
  if (classes.size() < 2) throw Error(ErrorCode::kInvalidSpec, "scene needs at least two classes");
  try {
    intrinsics.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::kInvalidSpec, e.what());
  }
  if (trajectory.waypoints.empty()) throw Error(ErrorCode::kInvalidSpec, "trajectory has no waypoints");
  if (trajectory.frame_count < 1) throw Error(ErrorCode::kInvalidSpec, "trajectory has no frames");
  if (!(trajectory.frame_rate > 0.0)) throw Error(ErrorCode::kInvalidSpec, "frame rate must be positive");
  if (!in_unit(noise.label_error_rate) || !in_unit(noise.instance_churn_rate) || !in_unit(noise.outlier_rate) ||
      !in_unit(noise.descriptor_flip_rate))
    throw Error(ErrorCode::kInvalidSpec, "noise rates must lie in [0, 1]");
  if (!(noise.pixel_sigma >= 0.0)) throw Error(ErrorCode::kInvalidSpec, "pixel noise must be >= 0");
  if (!(noise.label_confidence > 0.0 && noise.label_confidence <= 1.0))
    throw Error(ErrorCode::kInvalidSpec, "label confidence must be in (0, 1]");
  if (!(noise.outlier_min_m >= 0.0 && noise.outlier_max_m >= noise.outlier_min_m))
    throw Error(ErrorCode::kInvalidSpec, "outlier displacement range is invalid");
  for (const auto& o : planar_objects) {
    class_id(classes, o.class_name);
    if (!(o.half_u > 0.0 && o.half_v > 0.0)) throw Error(ErrorCode::kInvalidSpec, "planar extent must be positive");
  }
  for (const auto& c : clutter) {
    if (!c.class_name.empty()) class_id(classes, c.class_name);
    if (!(c.box_max.array() >= c.box_min.array()).all()) throw Error(ErrorCode::kInvalidSpec, "clutter box inverted");
  }
}

Trajectory GroundTruthBundle::trajectory() const {
  Trajectory t;
  for (std::size_t i = 0; i < poses.size(); ++i) t.push_back({timestamps[i], poses[i].inverse()});
  return t;
}

Pose3d look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target) {
  const Eigen::Vector3d forward = (target - eye).normalized();
  Eigen::Vector3d up = Eigen::Vector3d::UnitZ();
  if (std::abs(forward.dot(up)) > 0.999) up = Eigen::Vector3d::UnitY();
  const Eigen::Vector3d right = forward.cross(up).normalized();
  const Eigen::Vector3d down = forward.cross(right);
  Eigen::Matrix3d world_from_camera;
  world_from_camera << right, down, forward;
  return Pose3d(world_from_camera, eye).inverse();
}

GroundTruthBundle generate_scene(const SceneSpec& spec, std::uint64_t seed) {
  spec.validate();
  GroundTruthBundle b;
  b.spec = spec;
  b.seed = seed;
  auto rng = make_rng(seed, kScene);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  for (const auto& o : spec.planar_objects) {
    const ClassId cls = class_id(spec.classes, o.class_name);
    const Eigen::Vector3d n = o.plane.unitNormal();
    Eigen::Vector3d u, v;
    in_plane_axes(n, u, v);
    const Eigen::Vector3d c = o.center - o.plane.distance(o.center) * n;

    TrueObject obj;
    obj.cls = cls;
    obj.structure = spec.classes.at(cls).structure;
    obj.plane = o.plane;
    for (int i = -4; i <= 4; ++i)
      for (int j = -4; j <= 4; ++j) obj.outline.push_back(c + (i / 4.0) * o.half_u * u + (j / 4.0) * o.half_v * v);
    const int index = int(b.objects.size());
    b.objects.push_back(std::move(obj));

    for (std::size_t k = 0; k < o.count; ++k) {
      TruePoint p;
      p.id = b.points.size();
      p.cls = cls;
      p.object = index;
      const double a = (2.0 * unit(rng) - 1.0) * o.half_u;
      const double bb = (2.0 * unit(rng) - 1.0) * o.half_v;
      p.position = c + a * u + bb * v;
      if (unit(rng) < spec.noise.outlier_rate) {
        const double mag = spec.noise.outlier_min_m + unit(rng) * (spec.noise.outlier_max_m - spec.noise.outlier_min_m);
        p.position += (unit(rng) < 0.5 ? -mag : mag) * n;
        p.displaced = true;
      }
      p.descriptor = random_descriptor(rng);
      b.points.push_back(std::move(p));
    }
  }

  for (const auto& c : spec.clutter) {
    int index = -1;
    ClassId cls = 0;
    if (!c.class_name.empty()) {
      cls = class_id(spec.classes, c.class_name);
      TrueObject obj;
      obj.cls = cls;
      obj.structure = spec.classes.at(cls).structure;
      for (int corner = 0; corner < 8; ++corner)
        obj.outline.emplace_back(corner & 1 ? c.box_max.x() : c.box_min.x(), corner & 2 ? c.box_max.y() : c.box_min.y(),
                                 corner & 4 ? c.box_max.z() : c.box_min.z());
      index = int(b.objects.size());
      b.objects.push_back(std::move(obj));
    }
    for (std::size_t k = 0; k < c.count; ++k) {
      TruePoint p;
      p.id = b.points.size();
      p.cls = cls;
      p.object = index;
      const Eigen::Vector3d t(unit(rng), unit(rng), unit(rng));
      p.position = c.box_min + t.cwiseProduct(c.box_max - c.box_min);
      p.descriptor = random_descriptor(rng);
      b.points.push_back(std::move(p));
    }
  }

  const auto& wps = spec.trajectory.waypoints;
  std::vector<Pose3d> keys;
  for (const auto& w : wps) keys.push_back(look_at(w.position, w.look_at));
  const std::size_t frames = spec.trajectory.frame_count;
  for (std::size_t f = 0; f < frames; ++f) {
    if (keys.size() == 1 || frames == 1) {
      b.poses.push_back(keys.front());
    } else {
      const double s = double(f) / double(frames - 1) * double(keys.size() - 1);
      const std::size_t seg = std::min<std::size_t>(std::size_t(s), keys.size() - 2);
      b.poses.push_back(interpolate(keys[seg], keys[seg + 1], s - double(seg)));
    }
    b.timestamps.push_back(double(f) / spec.trajectory.frame_rate);
  }

  const std::size_t need = std::min<std::size_t>(10, b.points.size());
  std::size_t good = 0;
  for (const auto& pose : b.poses)
    if (visible_points(b, pose) >= need) ++good;
  if (double(good) < 0.9 * double(frames))
    throw Error(ErrorCode::kInvalidSpec, "scene content is out of view in more than 10% of frames");
  return b;
}

RenderedFrame render_frame(const GroundTruthBundle& bundle, std::size_t frame, const NoiseSpec& noise) {
  if (frame >= bundle.poses.size()) throw Error(ErrorCode::kInvalidArgument, "frame index out of range");
  const Intrinsics& k = bundle.spec.intrinsics;
  const Pose3d& pose = bundle.poses[frame];
  const int num_classes = bundle.spec.classes.size();

  // Raw instance ids: replay the churn process from the first frame.
  std::vector<InstanceId> raw(bundle.objects.size(), 0);
  InstanceId next = 1;
  for (std::size_t o = 0; o < raw.size(); ++o)
    if (!bundle.objects[o].structure) raw[o] = next++;
  {
    auto churn = make_rng(bundle.seed, kChurn);
    std::bernoulli_distribution fresh(noise.instance_churn_rate);
    for (std::size_t f = 1; f <= frame; ++f)
      for (std::size_t o = 0; o < raw.size(); ++o)
        if (!bundle.objects[o].structure && fresh(churn)) raw[o] = next++;
  }
  if (next > 65535) throw Error(ErrorCode::kInvalidSpec, "raw instance ids exceed 16 bits");

  RenderedFrame out;
  out.labels = Image16(k.width, k.height, 0);
  out.instances = InstanceMap(k.width, k.height);

  // Coarse object segments: structure first, then things far to near.
  std::vector<std::pair<double, std::size_t>> order;
  for (std::size_t o = 0; o < bundle.objects.size(); ++o) {
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (const auto& x : bundle.objects[o].outline) mean += x;
    mean /= double(bundle.objects[o].outline.size());
    const double depth = (pose * mean).z();
    order.emplace_back(bundle.objects[o].structure ? std::numeric_limits<double>::infinity() : depth, o);
  }
  std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
    return a.first > b.first || (a.first == b.first && a.second < b.second);
  });
  for (const auto& [depth, o] : order) {
    const TrueObject& obj = bundle.objects[o];
    double umin = 1e300, vmin = 1e300, umax = -1e300, vmax = -1e300;
    bool any = false;
    for (const auto& x : obj.outline) {
      const Eigen::Vector3d xc = pose * x;
      if (!(xc.z() > 0.05)) continue;
      const Pixeld px = project_camera(k, xc);
      umin = std::min(umin, px.x());
      umax = std::max(umax, px.x());
      vmin = std::min(vmin, px.y());
      vmax = std::max(vmax, px.y());
      any = true;
    }
    if (!any) continue;
    const int u0 = std::max(0, int(std::ceil(umin)));
    const int u1 = std::min(k.width - 1, int(std::floor(umax)));
    const int v0 = std::max(0, int(std::ceil(vmin)));
    const int v1 = std::min(k.height - 1, int(std::floor(vmax)));
    for (int v = v0; v <= v1; ++v)
      for (int u = u0; u <= u1; ++u) {
        out.labels.at(u, v) = std::uint16_t(obj.cls);
        out.instances.at(u, v) = raw[o];
      }
  }

  auto rng = make_rng(bundle.seed, kRender, frame);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (const auto& p : bundle.points) {
    const Eigen::Vector3d xc = pose * p.position;
    if (!(xc.z() > kMinDepth)) continue;
    Pixeld px = project_camera(k, xc);
    if (noise.pixel_sigma > 0.0) px += noise.pixel_sigma * Pixeld(gauss(rng), gauss(rng));
    int u = 0, v = 0;
    if (!k.contains(px) || !pixel_index(k.width, k.height, px, u, v)) continue;
    out.observations.push_back({p.id, px});
    out.labels.at(u, v) = std::uint16_t(p.cls);
    const bool thing = p.object >= 0 && !bundle.objects[std::size_t(p.object)].structure;
    out.instances.at(u, v) = thing ? raw[std::size_t(p.object)] : 0;
  }

  if (noise.label_error_rate > 0.0) {
    std::bernoulli_distribution flip(noise.label_error_rate);
    std::uniform_int_distribution<int> wrong(0, num_classes - 2);
    for (auto& label : out.labels.data) {
      if (!flip(rng)) continue;
      int c = wrong(rng);
      if (c >= label) ++c;
      label = std::uint16_t(c);
    }
  }
  out.probabilities = ProbabilityMap::FromLabels(out.labels, num_classes, noise.label_confidence);
  return out;
}

InitialEstimates perturb_initialization(const GroundTruthBundle& bundle, double pose_noise_m, double pose_noise_deg,
                                        double point_noise_m, std::uint64_t seed) {
  auto rng = make_rng(seed, kInit);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const auto random_direction = [&]() {
    Eigen::Vector3d d(gauss(rng), gauss(rng), gauss(rng));
    while (d.norm() < 1e-9) d = Eigen::Vector3d(gauss(rng), gauss(rng), gauss(rng));
    return Eigen::Vector3d(d.normalized());
  };

  InitialEstimates init;
  for (std::size_t f = 0; f < bundle.poses.size(); ++f) {
    if (f == 0) {
      init.poses.push_back(bundle.poses[0]);
      continue;
    }
    const Pose3d world = bundle.poses[f].inverse();
    const double angle = unit(rng) * pose_noise_deg * M_PI / 180.0;
    const Eigen::Vector3d axis = random_direction();
    const Eigen::Vector3d shift = unit(rng) * pose_noise_m * random_direction();
    const Eigen::Quaterniond q = world.rotation() * Eigen::Quaterniond(Eigen::AngleAxisd(angle, axis));
    init.poses.push_back(Pose3d(q, world.translation() + shift).inverse());
  }
  std::bernoulli_distribution flip(bundle.spec.noise.descriptor_flip_rate);
  for (const auto& p : bundle.points) {
    init.points.push_back(p.position + point_noise_m * Eigen::Vector3d(gauss(rng), gauss(rng), gauss(rng)));
    Descriptor d = p.descriptor;
    for (std::size_t bit = 0; bit < d.size(); ++bit)
      if (flip(rng)) d.flip(bit);
    init.descriptors.push_back(d);
  }
  return init;
}

Dataset to_dataset(const GroundTruthBundle& bundle, const InitialEstimates& init) {
  Dataset ds;
  ds.intrinsics = bundle.spec.intrinsics;
  for (const auto& c : bundle.spec.classes.classes()) ds.class_names.push_back(c.name);
  ds.label_confidence = bundle.spec.noise.label_confidence;
  for (std::size_t f = 0; f < bundle.poses.size(); ++f) {
    RenderedFrame r = render_frame(bundle, f, bundle.spec.noise);
    FrameRecord rec;
    rec.index = f;
    rec.timestamp = bundle.timestamps[f];
    rec.initial_pose = init.poses[f];
    rec.observations = std::move(r.observations);
    rec.labels = std::move(r.labels);
    rec.instances = Image16(r.instances.width, r.instances.height);
    for (std::size_t i = 0; i < r.instances.ids.size(); ++i) rec.instances.data[i] = std::uint16_t(r.instances.ids[i]);
    ds.frames.push_back(std::move(rec));
  }
  DatasetTruth truth;
  for (std::size_t i = 0; i < bundle.points.size(); ++i) {
    const TruePoint& p = bundle.points[i];
    ds.points[p.id] = PointRecord{p.id, init.points[i], init.descriptors[i]};
    truth.point_object[p.id] = p.object;
  }
  for (const auto& o : bundle.objects) truth.object_planes.push_back(o.plane);
  ds.truth = std::move(truth);
  ds.ground_truth = bundle.trajectory();
  return ds;
}

SceneSpec default_indoor_scene() {
  SceneSpec s;
  ClassInfo background{"background"};
  ClassInfo floor{"floor", true, true};
  ClassInfo book{"book", true, false};
  ClassInfo keyboard{"keyboard", true, false};
  ClassInfo cup{"cup", false, false};
  s.classes = ClassTable({background, floor, book, keyboard, cup});

  s.planar_objects.push_back({"floor", Plane3d(Eigen::Vector4d(0, 0, 1, 0)), {0.0, 0.0, 0.0}, 1.5, 1.5, 200});
  s.planar_objects.push_back({"book", Plane3d(Eigen::Vector4d(0, 0, 1, -0.75)), {-0.3, 0.15, 0.75}, 0.15, 0.11, 60});
  s.planar_objects.push_back(
      {"keyboard", Plane3d(Eigen::Vector4d(0, 0, 1, -0.75)), {0.25, -0.15, 0.75}, 0.22, 0.08, 80});
  s.clutter.push_back({"", {-0.9, -0.7, 0.0}, {0.9, 0.7, 1.3}, 146});

  // Short lateral sweep: a narrow baseline leaves point depths uncertain at the
  // centimeter level, the regime where plane priors carry information.
  s.trajectory.waypoints.push_back({{2.2, -0.075, 1.6}, {0.0, 0.0, 0.4}});
  s.trajectory.waypoints.push_back({{2.2, 0.075, 1.6}, {0.0, 0.0, 0.4}});
  s.trajectory.frame_count = 30;
  s.trajectory.frame_rate = 30.0;
  s.noise.pixel_sigma = 0.5;
  s.noise.label_error_rate = 0.1;
  s.noise.instance_churn_rate = 0.2;
  return s;
}

}  // namespace semplan
