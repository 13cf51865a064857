#include "semplan/cluster_map.hpp"

#include <algorithm>
#include <limits>

namespace semplan {

std::optional<ClassId> ClassTable::find(const std::string& name) const {
  for (std::size_t i = 0; i < classes_.size(); ++i)
    if (classes_[i].name == name) return static_cast<ClassId>(i);
  return std::nullopt;
}

Keyframe& SemanticMap::add_keyframe(KeyframeId id, double timestamp, const Pose3d& pose) {
  auto [it, inserted] = keyframes_.try_emplace(id, Keyframe{id, timestamp, pose});
  if (!inserted) throw Error(ErrorCode::kInvalidArgument, "duplicate keyframe " + std::to_string(id));
  return it->second;
}

MapPoint& SemanticMap::add_point(PointId id, const Eigen::Vector3d& position, const Descriptor& descriptor) {
  if (classes_.size() < 1) throw Error(ErrorCode::kInvalidArgument, "empty class table");
  MapPoint p;
  p.id = id;
  p.position = position;
  p.descriptor = descriptor;
  p.dist = ClassDistribution::Uniform(classes_.size());
  p.best_class = argmax_class(p.dist);
  auto [it, inserted] = points_.try_emplace(id, std::move(p));
  if (!inserted) throw Error(ErrorCode::kInvalidArgument, "duplicate point " + std::to_string(id));
  return it->second;
}

void SemanticMap::add_observation(PointId point_id, KeyframeId keyframe_id, const Pixeld& px, double weight) {
  if (!has_keyframe(keyframe_id))
    throw Error(ErrorCode::kInvalidArgument, "observation references unknown keyframe");
  point(point_id).observations.push_back(Observation{keyframe_id, px, weight});
}

MapPoint& SemanticMap::point(PointId id) {
  const auto it = points_.find(id);
  if (it == points_.end()) throw Error(ErrorCode::kInvalidArgument, "unknown point " + std::to_string(id));
  return it->second;
}

const MapPoint& SemanticMap::point(PointId id) const { return const_cast<SemanticMap*>(this)->point(id); }

Keyframe& SemanticMap::keyframe(KeyframeId id) {
  const auto it = keyframes_.find(id);
  if (it == keyframes_.end()) throw Error(ErrorCode::kInvalidArgument, "unknown keyframe " + std::to_string(id));
  return it->second;
}

const Keyframe& SemanticMap::keyframe(KeyframeId id) const { return const_cast<SemanticMap*>(this)->keyframe(id); }

Cluster& SemanticMap::cluster(ClusterId id) {
  const auto it = clusters_.find(id);
  if (it == clusters_.end()) throw Error(ErrorCode::kInvalidArgument, "unknown cluster " + std::to_string(id));
  return it->second;
}

const Cluster& SemanticMap::cluster(ClusterId id) const { return const_cast<SemanticMap*>(this)->cluster(id); }

InstanceId SemanticMap::resolve_instance(InstanceId id) const {
  auto it = aliases_.find(id);
  while (it != aliases_.end()) {
    id = it->second;
    it = aliases_.find(id);
  }
  return id;
}

void SemanticMap::alias_instance(InstanceId from, InstanceId to) {
  to = resolve_instance(to);
  if (from != to && from != 0) aliases_[from] = to;
}

std::optional<std::pair<ClassId, InstanceId>> SemanticMap::cluster_key(const MapPoint& p) const {
  if (classes_.at(p.best_class).structure) return std::make_pair(p.best_class, InstanceId{0});
  if (p.instance != 0) return std::make_pair(p.best_class, p.instance);
  return std::nullopt;
}

std::optional<ClusterId> SemanticMap::find_cluster(ClassId cls, InstanceId instance) const {
  const auto it = cluster_index_.find({cls, instance});
  if (it == cluster_index_.end()) return std::nullopt;
  return it->second;
}

ClusterId SemanticMap::create_cluster(ClassId cls, InstanceId instance) {
  const ClusterId id = next_cluster_++;
  Cluster c;
  c.id = id;
  c.cls = cls;
  c.instance = instance;
  c.planar_prior = classes_.at(cls).planar_prior;
  clusters_.emplace(id, std::move(c));
  cluster_index_[{cls, instance}] = id;
  return id;
}

void SemanticMap::erase_cluster(ClusterId id) {
  const auto it = clusters_.find(id);
  if (it == clusters_.end()) return;
  const auto key = std::make_pair(it->second.cls, it->second.instance);
  const auto idx = cluster_index_.find(key);
  if (idx != cluster_index_.end() && idx->second == id) cluster_index_.erase(idx);
  clusters_.erase(it);
}

bool upsert_point_semantics(SemanticMap& map, PointId point_id, const ProbabilityMap& pmap,
                            const InstanceMap& persistent_ids, const Pixeld& px) {
  MapPoint& p = map.point(point_id);
  const FusionResult fused = observe_point(p.dist, pmap, px);
  const InstanceId observed = map.resolve_instance(persistent_ids.at(px));

  p.dist = fused.posterior;
  p.best_class = argmax_class(p.dist);
  p.recent_instances.push_back(observed);
  while (p.recent_instances.size() > kInstanceVoteWindow) p.recent_instances.pop_front();

  std::map<InstanceId, int> counts;
  for (InstanceId id : p.recent_instances) ++counts[map.resolve_instance(id)];
  int best_count = 0;
  for (const auto& [id, n] : counts) best_count = std::max(best_count, n);
  // Ties go to the most recently observed id.
  for (auto it = p.recent_instances.rbegin(); it != p.recent_instances.rend(); ++it) {
    const InstanceId id = map.resolve_instance(*it);
    if (counts[id] == best_count) {
      p.instance = id;
      break;
    }
  }
  return fused.degenerate;
}

std::optional<ClusterId> assign_to_cluster(SemanticMap& map, PointId point_id) {
  MapPoint& p = map.point(point_id);
  const auto key = map.cluster_key(p);
  if (p.cluster && map.has_cluster(*p.cluster)) {
    const Cluster& current = map.cluster(*p.cluster);
    if (key && current.cls == key->first && current.instance == key->second) return p.cluster;
    Cluster& old = map.cluster(*p.cluster);
    old.members.erase(point_id);
    old.excluded.erase(point_id);
    if (old.members.empty()) map.erase_cluster(old.id);
  }
  p.cluster.reset();
  if (!key) return std::nullopt;
  ClusterId id = 0;
  if (const auto found = map.find_cluster(key->first, key->second)) {
    id = *found;
  } else {
    id = map.create_cluster(key->first, key->second);
  }
  map.cluster(id).members.insert(point_id);
  p.cluster = id;
  return id;
}

Eigen::Vector3d centroid(const Cluster& cluster, const SemanticMap& map) {
  if (cluster.members.empty()) throw Error(ErrorCode::kEmptyCluster, "centroid of empty cluster");
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  for (PointId id : cluster.members) sum += map.point(id).position;
  return sum / double(cluster.members.size());
}

double cluster_radius(const Cluster& cluster, const SemanticMap& map) {
  const Eigen::Vector3d c = centroid(cluster, map);
  double r = 0.0;
  for (PointId id : cluster.members) r = std::max(r, (map.point(id).position - c).norm());
  return r;
}

double descriptor_match_fraction(const Cluster& a, const Cluster& b, const SemanticMap& map, int radius) {
  if (a.members.empty() || b.members.empty())
    throw Error(ErrorCode::kEmptyCluster, "descriptor match on empty cluster");
  const Cluster& small = a.members.size() <= b.members.size() ? a : b;
  const Cluster& large = &small == &a ? b : a;
  std::vector<const Descriptor*> others;
  others.reserve(large.members.size());
  for (PointId id : large.members) others.push_back(&map.point(id).descriptor);

  std::size_t matched = 0;
  for (PointId id : small.members) {
    const Descriptor& d = map.point(id).descriptor;
    std::size_t best = std::numeric_limits<std::size_t>::max();
    for (const Descriptor* o : others) best = std::min(best, (d ^ *o).count());
    if (best <= std::size_t(radius)) ++matched;
  }
  return double(matched) / double(small.members.size());
}

bool try_merge_clusters(SemanticMap& map, ClusterId a, ClusterId b, const MergeConfig& cfg) {
  if (a == b || !map.has_cluster(a) || !map.has_cluster(b)) return false;
  const Cluster& ca = map.cluster(a);
  const Cluster& cb = map.cluster(b);
  if (ca.cls != cb.cls || ca.members.empty() || cb.members.empty()) return false;

  const ClassInfo& info = map.classes().at(ca.cls);
  const double tau = info.tau_merge +
                     info.merge_radius_scale * std::max(cluster_radius(ca, map), cluster_radius(cb, map));
  if (!((centroid(ca, map) - centroid(cb, map)).norm() < tau)) return false;
  if (!(descriptor_match_fraction(ca, cb, map, cfg.hamming_radius) > cfg.min_match_fraction)) return false;

  const ClusterId keep_id = std::min(a, b);
  const ClusterId drop_id = std::max(a, b);
  Cluster& keep = map.cluster(keep_id);
  Cluster dropped = map.cluster(drop_id);
  map.erase_cluster(drop_id);

  for (PointId id : dropped.members) {
    MapPoint& p = map.point(id);
    p.instance = keep.instance;
    for (InstanceId& r : p.recent_instances)
      if (r == dropped.instance) r = keep.instance;
    p.cluster = keep_id;
    keep.members.insert(id);
  }
  if (!keep.plane && dropped.plane) {
    keep.plane = dropped.plane;
    keep.inlier_count = dropped.inlier_count;
    keep.inlier_rms = dropped.inlier_rms;
    keep.excluded = dropped.excluded;
  }
  map.alias_instance(dropped.instance, keep.instance);
  return true;
}

std::size_t merge_pass(SemanticMap& map, const MergeConfig& cfg) {
  std::vector<ClusterId> ids;
  for (const auto& [id, c] : map.clusters())
    if (c.instance != 0) ids.push_back(id);
  std::size_t merges = 0;
  for (std::size_t i = 0; i < ids.size(); ++i)
    for (std::size_t j = i + 1; j < ids.size(); ++j)
      if (try_merge_clusters(map, ids[i], ids[j], cfg)) ++merges;
  return merges;
}

std::size_t reproject_repair(SemanticMap& map, KeyframeId keyframe_id, const InstanceMap& persistent_ids,
                             const Intrinsics& k, const RepairConfig& cfg) {
  const Pose3d& pose = map.keyframe(keyframe_id).pose;
  std::vector<PointId> candidates;
  for (const auto& [cid, c] : map.clusters())
    if (c.instance != 0) candidates.insert(candidates.end(), c.members.begin(), c.members.end());

  std::vector<PointId> reassigned;
  for (PointId id : candidates) {
    MapPoint& p = map.point(id);
    const Eigen::Vector3d xc = pose * p.position;
    if (!(xc.z() > kMinDepth)) continue;
    const Pixeld px = project_camera(k, xc);
    if (!k.contains(px)) continue;
    int u = 0, v = 0;
    if (!pixel_index(persistent_ids.width, persistent_ids.height, px, u, v)) continue;
    const InstanceId seg = map.resolve_instance(persistent_ids.at(u, v));
    if (seg == 0) continue;
    if (seg == p.instance) {
      p.repair_candidate = 0;
      p.repair_votes = 0;
      continue;
    }
    if (seg == p.repair_candidate) {
      ++p.repair_votes;
    } else {
      p.repair_candidate = seg;
      p.repair_votes = 1;
    }
    if (p.repair_votes >= cfg.votes_required) {
      p.instance = seg;
      p.recent_instances.assign(1, seg);
      p.repair_candidate = 0;
      p.repair_votes = 0;
      reassigned.push_back(id);
    }
  }
  for (PointId id : reassigned) assign_to_cluster(map, id);
  return reassigned.size();
}

}  // namespace semplan
