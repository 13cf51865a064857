#include "semplan/semantic_fusion.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

namespace semplan {

ClassDistribution::ClassDistribution(Eigen::VectorXd p) : p_(std::move(p)) {
  if (p_.size() == 0) throw Error(ErrorCode::kInvalidArgument, "empty class distribution");
  if (!p_.allFinite() || p_.minCoeff() < 0.0 || p_.maxCoeff() > 1.0 + 1e-12)
    throw Error(ErrorCode::kInvalidArgument, "class probabilities must lie in [0, 1]");
  if (std::abs(p_.sum() - 1.0) > 1e-6)
    throw Error(ErrorCode::kInvalidArgument, "class probabilities must sum to 1");
}

ClassDistribution ClassDistribution::Uniform(int num_classes) {
  return ClassDistribution(Eigen::VectorXd::Constant(num_classes, 1.0 / num_classes));
}

ClassDistribution ClassDistribution::OneHot(int num_classes, ClassId c) {
  Eigen::VectorXd p = Eigen::VectorXd::Zero(num_classes);
  p(c) = 1.0;
  return ClassDistribution(std::move(p));
}

FusionResult bayes_update(const ClassDistribution& prior, const ClassDistribution& observation) {
  if (prior.size() != observation.size())
    throw Error(ErrorCode::kInvalidArgument, "class count mismatch in fusion");
  const Eigen::VectorXd product = prior.probabilities().cwiseProduct(observation.probabilities());
  const double z = product.sum();
  if (!(z >= 1e-300)) return {prior, true};
  return {ClassDistribution(product / z), false};
}

ClassId argmax_class(const ClassDistribution& dist) {
  const Eigen::VectorXd& p = dist.probabilities();
  ClassId best = 0;
  for (Eigen::Index c = 1; c < p.size(); ++c)
    if (p(c) > p(best)) best = static_cast<ClassId>(c);
  return best;
}

bool pixel_index(int width, int height, const Pixeld& px, int& u, int& v) {
  if (!px.allFinite()) return false;
  const double ur = std::floor(px.x() + 0.5);
  const double vr = std::floor(px.y() + 0.5);
  if (ur < 0.0 || vr < 0.0 || ur >= width || vr >= height) return false;
  u = static_cast<int>(ur);
  v = static_cast<int>(vr);
  return true;
}

ProbabilityMap::ProbabilityMap(int width, int height, int num_classes, std::vector<double> values)
    : width_(width), height_(height), classes_(num_classes), values_(std::move(values)) {
  if (width <= 0 || height <= 0 || num_classes <= 0)
    throw Error(ErrorCode::kInvalidArgument, "probability map dimensions must be positive");
  if (values_.size() != std::size_t(width) * height * num_classes)
    throw Error(ErrorCode::kInvalidArgument, "probability map size mismatch");
  for (std::size_t i = 0; i < values_.size(); i += classes_) {
    double sum = 0.0;
    for (int c = 0; c < classes_; ++c) {
      double& x = values_[i + c];
      if (!std::isfinite(x)) throw Error(ErrorCode::kInvalidArgument, "non-finite probability");
      x = std::clamp(x, kProbabilityFloor, 1.0);
      sum += x;
    }
    for (int c = 0; c < classes_; ++c) values_[i + c] /= sum;
  }
}

ProbabilityMap ProbabilityMap::FromLabels(const Image16& labels, int num_classes, double alpha) {
  if (num_classes < 2) throw Error(ErrorCode::kInvalidArgument, "need at least two classes");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw Error(ErrorCode::kInvalidArgument, "confidence must be in (0, 1]");
  const double rest = (1.0 - alpha) / (num_classes - 1);
  std::vector<double> values(labels.data.size() * num_classes, rest);
  for (std::size_t i = 0; i < labels.data.size(); ++i) {
    const int c = labels.data[i];
    if (c >= num_classes) throw Error(ErrorCode::kInvalidArgument, "label exceeds class count");
    values[i * num_classes + c] = alpha;
  }
  return ProbabilityMap(labels.width, labels.height, num_classes, std::move(values));
}

bool ProbabilityMap::contains(const Pixeld& px) const {
  int u = 0, v = 0;
  return pixel_index(width_, height_, px, u, v);
}

ClassDistribution ProbabilityMap::distributionAt(const Pixeld& px) const {
  int u = 0, v = 0;
  if (!pixel_index(width_, height_, px, u, v))
    throw Error(ErrorCode::kOutOfBounds, "pixel outside probability map");
  return ClassDistribution(Eigen::Map<const Eigen::VectorXd>(&values_[index(u, v)], classes_));
}

ClassId ProbabilityMap::argmaxAt(int u, int v) const {
  const std::size_t base = index(u, v);
  ClassId best = 0;
  for (int c = 1; c < classes_; ++c)
    if (values_[base + c] > values_[base + best]) best = c;
  return best;
}

InstanceMap InstanceMap::FromImage(const Image16& image) {
  InstanceMap m(image.width, image.height);
  std::copy(image.data.begin(), image.data.end(), m.ids.begin());
  return m;
}

InstanceId InstanceMap::at(const Pixeld& px) const {
  int u = 0, v = 0;
  if (!pixel_index(width, height, px, u, v)) throw Error(ErrorCode::kOutOfBounds, "pixel outside instance map");
  return at(u, v);
}

FusionResult observe_point(const ClassDistribution& dist, const ProbabilityMap& pmap, const Pixeld& px) {
  return bayes_update(dist, pmap.distributionAt(px));
}

double mask_iou(const Mask& a, const Mask& b) {
  std::size_t inter = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++inter;
      ++ia;
      ++ib;
    }
  }
  const std::size_t uni = a.size() + b.size() - inter;
  return uni == 0 ? 0.0 : double(inter) / double(uni);
}

std::map<InstanceId, Mask> extract_masks(const InstanceMap& map) {
  std::map<InstanceId, Mask> masks;
  for (std::size_t i = 0; i < map.ids.size(); ++i)
    if (map.ids[i] != 0) masks[map.ids[i]].push_back(static_cast<std::uint32_t>(i));
  return masks;
}

std::map<InstanceId, ClassId> instance_classes(const InstanceMap& instances, const Image16& labels) {
  if (instances.width != labels.width || instances.height != labels.height)
    throw Error(ErrorCode::kInvalidArgument, "instance and label images differ in size");
  std::map<InstanceId, std::map<ClassId, std::size_t>> votes;
  for (std::size_t i = 0; i < instances.ids.size(); ++i)
    if (instances.ids[i] != 0) ++votes[instances.ids[i]][labels.data[i]];
  std::map<InstanceId, ClassId> result;
  for (const auto& [id, counts] : votes) {
    ClassId best = counts.begin()->first;
    std::size_t best_count = 0;
    for (const auto& [cls, n] : counts)
      if (n > best_count) {
        best = cls;
        best_count = n;
      }
    result[id] = best;
  }
  return result;
}

namespace {

struct Candidate {
  double iou;
  InstanceId raw;
  InstanceId persistent;
};

// Greedy one-to-one matching of still-unassigned raw instances against a past frame.
void match_against(const TrackedFrame& past, double threshold, const std::map<InstanceId, Mask>& masks,
                   const std::map<InstanceId, ClassId>& classes, TrackAssignment& assignment,
                   std::map<InstanceId, bool>& persistent_used) {
  std::vector<Candidate> candidates;
  for (const auto& [raw, mask] : masks) {
    if (assignment.count(raw)) continue;
    for (const auto& [past_raw, inst] : past.instances) {
      if (inst.cls != classes.at(raw) || persistent_used[inst.persistent]) continue;
      const double iou = mask_iou(mask, inst.mask);
      if (iou >= threshold) candidates.push_back({iou, raw, inst.persistent});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    return std::tie(b.iou, a.raw, a.persistent) < std::tie(a.iou, b.raw, b.persistent);
  });
  for (const Candidate& c : candidates) {
    if (assignment.count(c.raw) || persistent_used[c.persistent]) continue;
    assignment[c.raw] = c.persistent;
    persistent_used[c.persistent] = true;
  }
}

}  // namespace

TrackAssignment track_instances(InstanceTrackState& state, std::int64_t frame, const InstanceMap& raw,
                                const std::map<InstanceId, ClassId>& class_of, const TrackerConfig& cfg) {
  const std::map<InstanceId, Mask> masks = extract_masks(raw);
  std::map<InstanceId, ClassId> classes;
  for (const auto& [id, mask] : masks) {
    const auto it = class_of.find(id);
    classes[id] = it == class_of.end() ? 0 : it->second;
  }

  TrackAssignment assignment;
  std::map<InstanceId, bool> used;
  if (!state.history.empty()) match_against(state.history[0], cfg.iou_previous, masks, classes, assignment, used);
  if (state.history.size() > 1)
    match_against(state.history[1], cfg.iou_second_previous, masks, classes, assignment, used);
  for (const auto& [id, mask] : masks)
    if (!assignment.count(id)) assignment[id] = state.next_id++;

  TrackedFrame current;
  current.frame = frame;
  for (const auto& [id, mask] : masks) current.instances[id] = TrackedInstance{mask, classes[id], assignment[id]};
  state.history.push_front(std::move(current));
  while (state.history.size() > 2) state.history.pop_back();
  return assignment;
}

InstanceMap relabel(const InstanceMap& raw, const TrackAssignment& assignment) {
  InstanceMap out(raw.width, raw.height);
  for (std::size_t i = 0; i < raw.ids.size(); ++i) {
    if (raw.ids[i] == 0) continue;
    const auto it = assignment.find(raw.ids[i]);
    out.ids[i] = it == assignment.end() ? 0 : it->second;
  }
  return out;
}

}  // namespace semplan
