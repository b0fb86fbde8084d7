#include "bharnet/preprocess.hpp"

#include <array>
#include <cmath>

#include "bharnet/errors.hpp"

namespace bharnet::preprocess {

namespace {

using Vec3 = std::array<double, 3>;

Vec3 sub(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
Vec3 point(const SkeletonSequence& s, int t, int v) { return {s.at(0, t, v), s.at(1, t, v), s.at(2, t, v)}; }

constexpr double kDegenerate = 1e-9;

// Nearest ancestor-or-self that is a center joint, -1 if none.
std::vector<int> center_owner(const GraphTopology& topo) {
  std::vector<bool> is_center(static_cast<std::size_t>(topo.joint_count()), false);
  for (int c : topo.center_joints()) is_center[c] = true;
  std::vector<int> owner(static_cast<std::size_t>(topo.joint_count()), -1);
  for (int v = 0; v < topo.joint_count(); ++v) {
    if (topo.is_dummy(v)) continue;
    for (int u = v; u != -1; u = topo.parent(u)) {
      if (is_center[u]) {
        owner[v] = u;
        break;
      }
    }
  }
  return owner;
}

void check_topology(const SkeletonSequence& seq, const GraphTopology& topo) {
  if (seq.joints != topo.joint_count())
    throw InputError("sequence '" + seq.id + "' does not match topology '" + topo.name() + "'");
}

}  // namespace

Centering parse_centering(const std::string& name) {
  if (name == "body_hip") return Centering::kBodyHip;
  if (name == "hand_wrist") return Centering::kHandWrist;
  if (name == "none") return Centering::kNone;
  throw ConfigError("unknown centering '" + name + "' (body_hip|hand_wrist|none)");
}

const char* to_string(Centering c) {
  switch (c) {
    case Centering::kBodyHip:
      return "body_hip";
    case Centering::kHandWrist:
      return "hand_wrist";
    case Centering::kNone:
      return "none";
  }
  return "?";
}

void PreprocessConfig::validate() const {
  if (target_length < 2) throw ConfigError("target_length must be >= 2");
  if (max_gap < 0) throw ConfigError("max_gap must be >= 0");
}

std::vector<bool> detect_valid_frames(const SkeletonSequence& seq, const std::vector<int>& joint_subset) {
  if (joint_subset.empty()) throw InputError("detect_valid_frames: empty joint subset");
  for (int v : joint_subset)
    if (v < 0 || v >= seq.joints) throw InputError("detect_valid_frames: joint index " + std::to_string(v) + " out of range");
  std::vector<bool> out(static_cast<std::size_t>(seq.frames), true);
  for (int t = 0; t < seq.frames; ++t)
    for (int v : joint_subset)
      if (!seq.is_valid(t, v)) {
        out[t] = false;
        break;
      }
  return out;
}

SkeletonSequence interpolate_gaps(const SkeletonSequence& seq, int max_gap) {
  if (max_gap < 0) throw ConfigError("max_gap must be >= 0");
  SkeletonSequence out = seq;
  for (int v = 0; v < seq.joints; ++v) {
    int last_valid = -1;
    for (int t = 0; t < seq.frames; ++t) {
      if (!seq.is_valid(t, v)) continue;
      const int gap = t - last_valid - 1;
      if (last_valid >= 0 && gap > 0 && gap <= max_gap) {
        const double span = static_cast<double>(t - last_valid);
        for (int g = last_valid + 1; g < t; ++g) {
          const double w = static_cast<double>(g - last_valid) / span;
          for (int c = 0; c < seq.channels; ++c) {
            const double a = seq.at(c, last_valid, v);
            const double b = seq.at(c, t, v);
            out.at(c, g, v) = a + w * (b - a);
          }
          out.set_valid(g, v, true);
        }
      }
      last_valid = t;
    }
  }
  return out;
}

SkeletonSequence resample_temporal(const SkeletonSequence& seq, int target_length) {
  if (seq.frames < 2) throw InputError("resample_temporal: sequence '" + seq.id + "' has fewer than 2 frames");
  if (target_length < 2) throw ConfigError("target_length must be >= 2");
  SkeletonSequence out = seq;
  out.frames = target_length;
  out.coords.assign(static_cast<std::size_t>(seq.channels) * target_length * seq.joints, 0.0);
  out.valid.assign(static_cast<std::size_t>(target_length) * seq.joints, false);

  // Source position t*(T-1)/(L-1) kept as an integer numerator to make
  // the floor and the endpoints exact.
  const long den = target_length - 1;
  for (int t = 0; t < target_length; ++t) {
    const long num = static_cast<long>(t) * (seq.frames - 1);
    const int lo = static_cast<int>(num / den);
    const long rem = num % den;
    const double frac = static_cast<double>(rem) / static_cast<double>(den);
    const int hi = rem == 0 ? lo : lo + 1;
    const int nearest = 2 * rem >= den ? hi : lo;
    for (int v = 0; v < seq.joints; ++v) {
      if (!seq.is_valid(nearest, v)) continue;
      out.set_valid(t, v, true);
      const bool both = seq.is_valid(lo, v) && seq.is_valid(hi, v);
      for (int c = 0; c < seq.channels; ++c) {
        if (rem == 0 || !both) {
          out.at(c, t, v) = seq.at(c, nearest, v);
        } else {
          const double a = seq.at(c, lo, v);
          const double b = seq.at(c, hi, v);
          out.at(c, t, v) = a + frac * (b - a);
        }
      }
    }
  }
  return out;
}

SkeletonSequence pad_boundary(const SkeletonSequence& seq, int target_length) {
  if (seq.frames > target_length)
    throw InputError("pad_boundary: sequence '" + seq.id + "' longer than target length");
  if (seq.frames < 1) throw InputError("pad_boundary: empty sequence");
  auto out = seq;
  out.frames = target_length;
  out.coords.assign(static_cast<std::size_t>(seq.channels) * target_length * seq.joints, 0.0);
  out.valid.assign(static_cast<std::size_t>(target_length) * seq.joints, false);
  for (int t = 0; t < target_length; ++t) {
    const int src = t < seq.frames ? t : seq.frames - 1;
    for (int v = 0; v < seq.joints; ++v) {
      out.set_valid(t, v, seq.is_valid(src, v));
      for (int c = 0; c < seq.channels; ++c) out.at(c, t, v) = seq.at(c, src, v);
    }
  }
  return out;
}

SkeletonSequence center_body(const SkeletonSequence& seq, const GraphTopology& topo) {
  check_topology(seq, topo);
  if (topo.center_joints().empty()) throw InputError("center_body: topology has no center joint");
  const int center = topo.center_joints().front();
  auto out = seq;
  for (int t = 0; t < seq.frames; ++t) {
    if (!seq.is_valid(t, center)) continue;
    for (int v = 0; v < seq.joints; ++v) {
      if (topo.is_dummy(v) || !seq.is_valid(t, v)) continue;
      for (int c = 0; c < seq.channels; ++c) out.at(c, t, v) = seq.at(c, t, v) - seq.at(c, t, center);
    }
  }
  return out;
}

SkeletonSequence center_hand(const SkeletonSequence& seq, const GraphTopology& topo) {
  check_topology(seq, topo);
  if (topo.center_joints().empty()) throw InputError("center_hand: topology has no center joint");
  const auto owner = center_owner(topo);
  auto out = seq;
  for (int t = 0; t < seq.frames; ++t) {
    for (int v = 0; v < seq.joints; ++v) {
      const int c0 = owner[v];
      if (c0 < 0 || !seq.is_valid(t, v) || !seq.is_valid(t, c0)) continue;
      for (int c = 0; c < seq.channels; ++c) out.at(c, t, v) = seq.at(c, t, v) - seq.at(c, t, c0);
    }
  }
  return out;
}

std::vector<int> hand_offsets(const std::string& topology_name) {
  if (topology_name == "hand") return {0};
  if (topology_name == "hands") return {0, layout::kHandJoints};
  if (topology_name == "combined") return {layout::kLeftHandOffset, layout::kRightHandOffset};
  throw InputError("topology '" + topology_name + "' has no hand joints");
}

CanonicalResult canonical_transform(const SkeletonSequence& hand) {
  const auto offsets = hand_offsets(hand.topology_name);
  CanonicalResult result{hand, std::vector<bool>(static_cast<std::size_t>(hand.frames) * offsets.size(), false),
                         static_cast<int>(offsets.size())};
  auto& out = result.sequence;
  for (int t = 0; t < hand.frames; ++t) {
    for (std::size_t h = 0; h < offsets.size(); ++h) {
      const int base = offsets[h];
      const int wrist = base + layout::kWrist;
      const int index_mcp = base + layout::kIndexMcp;
      const int middle_mcp = base + layout::kMiddleMcp;
      const int pinky_mcp = base + layout::kPinkyMcp;
      auto flag = result.flagged[static_cast<std::size_t>(t) * offsets.size() + h];
      if (!hand.is_valid(t, wrist) || !hand.is_valid(t, index_mcp) || !hand.is_valid(t, middle_mcp) ||
          !hand.is_valid(t, pinky_mcp)) {
        flag = true;
        continue;
      }
      const Vec3 origin = point(hand, t, wrist);
      Vec3 e1 = sub(point(hand, t, middle_mcp), origin);
      const double n1 = std::sqrt(dot(e1, e1));
      const Vec3 normal = cross(sub(point(hand, t, index_mcp), origin), sub(point(hand, t, pinky_mcp), origin));
      if (n1 < kDegenerate) {
        flag = true;
        continue;
      }
      for (double& x : e1) x /= n1;
      const double proj = dot(normal, e1);
      Vec3 e2 = {normal[0] - proj * e1[0], normal[1] - proj * e1[1], normal[2] - proj * e1[2]};
      const double n2 = std::sqrt(dot(e2, e2));
      if (n2 < kDegenerate) {
        flag = true;
        continue;
      }
      for (double& x : e2) x /= n2;
      const Vec3 e3 = cross(e1, e2);
      for (int k = 0; k < layout::kHandJoints; ++k) {
        const int v = base + k;
        if (!hand.is_valid(t, v)) continue;
        const Vec3 d = sub(point(hand, t, v), origin);
        out.at(0, t, v) = dot(d, e1);
        out.at(1, t, v) = dot(d, e2);
        out.at(2, t, v) = dot(d, e3);
      }
    }
  }
  return result;
}

std::vector<std::vector<int>> validity_groups(const GraphTopology& topo) {
  const auto owner = center_owner(topo);
  std::vector<std::vector<int>> groups;
  std::vector<int> slot(static_cast<std::size_t>(topo.joint_count()), -1);
  std::vector<int> orphans;
  for (int v = 0; v < topo.joint_count(); ++v) {
    if (topo.is_dummy(v)) continue;
    const int o = owner[v];
    if (o < 0) {
      orphans.push_back(v);
      continue;
    }
    if (slot[o] < 0) {
      slot[o] = static_cast<int>(groups.size());
      groups.emplace_back();
    }
    groups[slot[o]].push_back(v);
  }
  if (!orphans.empty()) groups.push_back(std::move(orphans));
  return groups;
}

SkeletonSequence run_pipeline(const SkeletonSequence& seq, const PreprocessConfig& cfg, const GraphTopology& topo) {
  cfg.validate();
  check_topology(seq, topo);

  // A partially observed group (body, or one hand) counts as a missed
  // detection for that whole group on that frame.
  SkeletonSequence cur = seq;
  for (const auto& group : validity_groups(topo)) {
    const auto frame_ok = detect_valid_frames(cur, group);
    for (int t = 0; t < cur.frames; ++t)
      if (!frame_ok[t])
        for (int v : group) cur.mask(t, v);
  }
  cur = interpolate_gaps(cur, cfg.max_gap);

  if (cur.frames > cfg.target_length) {
    cur = resample_temporal(cur, cfg.target_length);
  } else if (cur.frames < cfg.target_length) {
    cur = pad_boundary(cur, cfg.target_length);
  }

  switch (cfg.centering) {
    case Centering::kBodyHip:
      cur = center_body(cur, topo);
      break;
    case Centering::kHandWrist:
      cur = center_hand(cur, topo);
      break;
    case Centering::kNone:
      break;
  }
  if (cfg.canonical) cur = canonical_transform(cur).sequence;
  return cur;
}

}  // namespace bharnet::preprocess
