#include "bharnet/skeleton.hpp"

#include <cmath>
#include <sstream>

#include "bharnet/errors.hpp"

namespace bharnet {

namespace {

// NTU RGB+D kinematic tree, (parent, child), 0-based.
const std::vector<GraphTopology::Edge> kBodyEdges = {
    {0, 1},  {1, 20},  {20, 2},  {2, 3},   {20, 4},  {4, 5},   {5, 6},   {6, 7},
    {20, 8}, {8, 9},   {9, 10},  {10, 11}, {0, 12},  {12, 13}, {13, 14}, {14, 15},
    {0, 16}, {16, 17}, {17, 18}, {18, 19}, {7, 22},  {22, 21}, {11, 24}, {24, 23},
};

// MediaPipe hand: wrist fans out to five fingers of four joints each.
std::vector<GraphTopology::Edge> hand_edges(int offset) {
  std::vector<GraphTopology::Edge> edges;
  for (int finger = 0; finger < 5; ++finger) {
    int prev = offset + layout::kWrist;
    for (int k = 1; k <= 4; ++k) {
      const int joint = offset + 4 * finger + k;
      edges.emplace_back(prev, joint);
      prev = joint;
    }
  }
  return edges;
}

}  // namespace

GraphTopology::GraphTopology(std::string name, int joint_count, std::vector<Edge> edges,
                             std::vector<bool> dummy_mask, std::vector<int> center_joints)
    : name_(std::move(name)),
      joint_count_(joint_count),
      edges_(std::move(edges)),
      dummy_mask_(std::move(dummy_mask)),
      center_joints_(std::move(center_joints)) {
  if (joint_count_ <= 0) throw InputError("topology '" + name_ + "': joint_count must be positive");
  if (static_cast<int>(dummy_mask_.size()) != joint_count_)
    throw InputError("topology '" + name_ + "': dummy_mask length != joint_count");
  parent_.assign(static_cast<std::size_t>(joint_count_), -1);
  for (const auto& [p, c] : edges_) {
    if (p < 0 || c < 0 || p >= joint_count_ || c >= joint_count_)
      throw InputError("topology '" + name_ + "': edge index out of range");
    if (p == c) throw InputError("topology '" + name_ + "': self-loop");
    if (dummy_mask_[p] || dummy_mask_[c]) throw InputError("topology '" + name_ + "': dummy joint has an edge");
    if (parent_[c] != -1) throw InputError("topology '" + name_ + "': joint with two parents");
    parent_[c] = p;
  }
  // Walking up from every joint must terminate at a root, otherwise there is a cycle.
  for (int v = 0; v < joint_count_; ++v) {
    int steps = 0;
    for (int u = v; u != -1; u = parent_[u]) {
      if (++steps > joint_count_) throw InputError("topology '" + name_ + "': edges contain a cycle");
    }
  }
  for (int c : center_joints_) {
    if (c < 0 || c >= joint_count_) throw InputError("topology '" + name_ + "': center joint out of range");
    if (dummy_mask_[c]) throw InputError("topology '" + name_ + "': center joint is a dummy");
  }
}

bool GraphTopology::operator==(const GraphTopology& other) const {
  return name_ == other.name_ && joint_count_ == other.joint_count_ && edges_ == other.edges_ &&
         dummy_mask_ == other.dummy_mask_ && center_joints_ == other.center_joints_;
}

GraphTopology build_body_topology() {
  return GraphTopology("body", layout::kBodyJoints, kBodyEdges,
                       std::vector<bool>(layout::kBodyJoints, false), {layout::kHip});
}

GraphTopology build_hand_topology() {
  return GraphTopology("hand", layout::kHandJoints, hand_edges(0),
                       std::vector<bool>(layout::kHandJoints, false), {layout::kWrist});
}

GraphTopology build_two_hand_topology() {
  auto edges = hand_edges(0);
  const auto right = hand_edges(layout::kHandJoints);
  edges.insert(edges.end(), right.begin(), right.end());
  return GraphTopology("hands", layout::kHandsJoints, std::move(edges),
                       std::vector<bool>(layout::kHandsJoints, false),
                       {layout::kWrist, layout::kHandJoints + layout::kWrist});
}

GraphTopology build_combined_topology() {
  std::vector<GraphTopology::Edge> edges = kBodyEdges;
  const auto left = hand_edges(layout::kLeftHandOffset);
  const auto right = hand_edges(layout::kRightHandOffset);
  edges.insert(edges.end(), left.begin(), left.end());
  edges.insert(edges.end(), right.begin(), right.end());
  edges.emplace_back(layout::kLeftWrist, layout::kLeftHandOffset);
  edges.emplace_back(layout::kRightWrist, layout::kRightHandOffset);

  std::vector<bool> dummy(layout::kCombinedJoints, false);
  for (int d = 0; d < layout::kDummyJoints; ++d) dummy[layout::kDummyOffset + d] = true;
  return GraphTopology("combined", layout::kCombinedJoints, std::move(edges), std::move(dummy),
                       {layout::kHip, layout::kLeftHandOffset, layout::kRightHandOffset});
}

GraphTopology topology_by_name(const std::string& name) {
  if (name == "body") return build_body_topology();
  if (name == "hand") return build_hand_topology();
  if (name == "hands") return build_two_hand_topology();
  if (name == "combined") return build_combined_topology();
  throw InputError("unknown topology '" + name + "'");
}

SkeletonSequence SkeletonSequence::zeros(std::string id, int label, int frames, const GraphTopology& topo,
                                         double fps) {
  SkeletonSequence seq;
  seq.id = std::move(id);
  seq.label = label;
  seq.fps = fps;
  seq.frames = frames;
  seq.joints = topo.joint_count();
  seq.topology_name = topo.name();
  seq.coords.assign(static_cast<std::size_t>(seq.channels * frames * seq.joints), 0.0);
  seq.valid.assign(static_cast<std::size_t>(frames * seq.joints), false);
  return seq;
}

void SkeletonSequence::mask(int t, int v) {
  set_valid(t, v, false);
  for (int c = 0; c < channels; ++c) at(c, t, v) = 0.0;
}

const char* to_string(SplitTag tag) {
  switch (tag) {
    case SplitTag::kTrain:
      return "train";
    case SplitTag::kVal:
      return "val";
    case SplitTag::kTest:
      return "test";
  }
  return "?";
}

std::vector<Violation> validate_sequence(const SkeletonSequence& seq, const GraphTopology& topo,
                                         int class_count) {
  std::vector<Violation> report;
  auto add = [&](Violation::Kind kind, std::string msg) { report.push_back({kind, std::move(msg)}); };

  if (seq.topology_name != topo.name())
    add(Violation::Kind::kTopology, "topology '" + seq.topology_name + "' does not match '" + topo.name() + "'");
  if (seq.frames < 1) add(Violation::Kind::kShape, "frame count must be >= 1");
  if (seq.joints != topo.joint_count())
    add(Violation::Kind::kShape, "joint count " + std::to_string(seq.joints) + " != topology joint count " +
                                     std::to_string(topo.joint_count()));
  if (seq.channels != layout::kChannels) add(Violation::Kind::kShape, "expected 3 coordinate channels");
  const auto expect_coords = static_cast<std::size_t>(seq.channels) * static_cast<std::size_t>(seq.frames) *
                             static_cast<std::size_t>(seq.joints);
  const auto expect_valid = static_cast<std::size_t>(seq.frames) * static_cast<std::size_t>(seq.joints);
  if (seq.coords.size() != expect_coords || seq.valid.size() != expect_valid || seq.frames < 1) {
    add(Violation::Kind::kShape, "flat array lengths disagree with C*T*V / T*V");
    return report;
  }
  if (!(seq.fps > 0.0) || !std::isfinite(seq.fps)) add(Violation::Kind::kFps, "fps must be positive");
  if (seq.label < 0 || (class_count > 0 && seq.label >= class_count))
    add(Violation::Kind::kLabel, "label " + std::to_string(seq.label) + " out of range");

  for (int c = 0; c < seq.channels; ++c)
    for (int t = 0; t < seq.frames; ++t)
      for (int v = 0; v < seq.joints; ++v) {
        const double x = seq.at(c, t, v);
        if (!std::isfinite(x)) {
          std::ostringstream os;
          os << "non-finite coordinate at (c=" << c << ", t=" << t << ", v=" << v << ")";
          add(Violation::Kind::kNonFinite, os.str());
        } else if (!seq.is_valid(t, v) && x != 0.0) {
          std::ostringstream os;
          os << "invalid joint carries non-zero coordinate at (c=" << c << ", t=" << t << ", v=" << v << ")";
          add(Violation::Kind::kZeroMask, os.str());
        }
      }
  if (seq.joints == topo.joint_count()) {
    for (int t = 0; t < seq.frames; ++t)
      for (int v = 0; v < seq.joints; ++v)
        if (topo.is_dummy(v) && seq.is_valid(t, v))
          add(Violation::Kind::kZeroMask, "dummy joint " + std::to_string(v) + " marked valid");
  }
  return report;
}

void check_split(const DatasetSplit& split) {
  if (split.sequences.empty()) throw InputError("dataset split is empty");
  if (split.class_count < 1) throw InputError("dataset split has no classes");
  for (const auto& s : split.sequences)
    if (s.label < 0 || s.label >= split.class_count)
      throw InputError("sequence '" + s.id + "' label out of range");
}

SkeletonSequence extract_joints(const SkeletonSequence& seq, int first, int count, const GraphTopology& target) {
  if (first < 0 || count != target.joint_count() || first + count > seq.joints)
    throw InputError("joint range does not fit sequence '" + seq.id + "'");
  auto out = SkeletonSequence::zeros(seq.id, seq.label, seq.frames, target, seq.fps);
  for (int t = 0; t < seq.frames; ++t)
    for (int v = 0; v < count; ++v) {
      out.set_valid(t, v, seq.is_valid(t, first + v));
      for (int c = 0; c < seq.channels; ++c) out.at(c, t, v) = seq.at(c, t, first + v);
    }
  return out;
}

SkeletonSequence body_stream(const SkeletonSequence& combined) {
  if (combined.topology_name != "combined") throw InputError("body_stream expects a combined-topology sequence");
  return extract_joints(combined, 0, layout::kBodyJoints, build_body_topology());
}

SkeletonSequence hand_stream(const SkeletonSequence& combined) {
  if (combined.topology_name != "combined") throw InputError("hand_stream expects a combined-topology sequence");
  return extract_joints(combined, layout::kLeftHandOffset, layout::kHandsJoints, build_two_hand_topology());
}

}  // namespace bharnet
