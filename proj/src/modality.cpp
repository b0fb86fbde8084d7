#include "bharnet/modality.hpp"

#include "bharnet/errors.hpp"

namespace bharnet::modality {

const char* to_string(Kind k) {
  switch (k) {
    case Kind::kJoint:
      return "J";
    case Kind::kBone:
      return "B";
    case Kind::kJointMotion:
      return "JM";
    case Kind::kBoneMotion:
      return "BM";
  }
  return "?";
}

Kind parse_kind(const std::string& s) {
  if (s == "J") return Kind::kJoint;
  if (s == "B") return Kind::kBone;
  if (s == "JM") return Kind::kJointMotion;
  if (s == "BM") return Kind::kBoneMotion;
  throw ConfigError("unknown modality '" + s + "' (J|B|JM|BM)");
}

ModalityTensor joints_of(const SkeletonSequence& seq) {
  return {Kind::kJoint, seq.channels, seq.frames, seq.joints, seq.coords, seq.id};
}

ModalityTensor derive_bone(const SkeletonSequence& seq, const GraphTopology& topo) {
  if (seq.joints != topo.joint_count())
    throw InputError("derive_bone: sequence '" + seq.id + "' does not match topology '" + topo.name() + "'");
  ModalityTensor out{Kind::kBone, seq.channels, seq.frames, seq.joints,
                     std::vector<double>(seq.coords.size(), 0.0), seq.id};
  for (int v = 0; v < seq.joints; ++v) {
    const int p = topo.parent(v);
    if (p < 0) continue;
    for (int t = 0; t < seq.frames; ++t) {
      if (!seq.is_valid(t, v) || !seq.is_valid(t, p)) continue;
      for (int c = 0; c < seq.channels; ++c) out.at(c, t, v) = seq.at(c, t, v) - seq.at(c, t, p);
    }
  }
  return out;
}

ModalityTensor derive_motion(const ModalityTensor& m) {
  if (m.frames < 2) throw InputError("derive_motion: need at least 2 frames");
  Kind kind;
  switch (m.kind) {
    case Kind::kJoint:
      kind = Kind::kJointMotion;
      break;
    case Kind::kBone:
      kind = Kind::kBoneMotion;
      break;
    default:
      throw InputError("derive_motion: input is already a motion modality");
  }
  ModalityTensor out{kind, m.channels, m.frames, m.joints, std::vector<double>(m.data.size(), 0.0), m.source_id};
  for (int c = 0; c < m.channels; ++c)
    for (int t = 0; t + 1 < m.frames; ++t)
      for (int v = 0; v < m.joints; ++v) out.at(c, t, v) = m.at(c, t + 1, v) - m.at(c, t, v);
  return out;
}

std::array<ModalityTensor, 4> modality_set(const SkeletonSequence& seq, const GraphTopology& topo) {
  auto j = joints_of(seq);
  auto b = derive_bone(seq, topo);
  auto jm = derive_motion(j);
  auto bm = derive_motion(b);
  return {std::move(j), std::move(b), std::move(jm), std::move(bm)};
}

ModalityTensor derive(const SkeletonSequence& seq, const GraphTopology& topo, Kind kind) {
  switch (kind) {
    case Kind::kJoint:
      return joints_of(seq);
    case Kind::kBone:
      return derive_bone(seq, topo);
    case Kind::kJointMotion:
      return derive_motion(joints_of(seq));
    case Kind::kBoneMotion:
      return derive_motion(derive_bone(seq, topo));
  }
  throw InputError("unknown modality");
}

}  // namespace bharnet::modality
