#pragma once

#include <array>
#include <string>
#include <vector>

#include "bharnet/skeleton.hpp"

namespace bharnet::modality {

enum class Kind { kJoint, kBone, kJointMotion, kBoneMotion };

const char* to_string(Kind k);  // "J", "B", "JM", "BM"
Kind parse_kind(const std::string& s);

struct ModalityTensor {
  Kind kind = Kind::kJoint;
  int channels = 0;
  int frames = 0;
  int joints = 0;
  std::vector<double> data;  // [c][t][v]
  std::string source_id;

  double at(int c, int t, int v) const {
    return data[(static_cast<std::size_t>(c) * frames + t) * joints + v];
  }
  double& at(int c, int t, int v) { return data[(static_cast<std::size_t>(c) * frames + t) * joints + v]; }
};

ModalityTensor joints_of(const SkeletonSequence& seq);

/// bone[v] = x[v] - x[parent(v)]; zero at roots, dummies, and where either endpoint is invalid.
ModalityTensor derive_bone(const SkeletonSequence& seq, const GraphTopology& topo);

/// Forward difference in time, last frame zero. J -> JM, B -> BM.
ModalityTensor derive_motion(const ModalityTensor& m);

/// {J, B, JM, BM} in that order.
std::array<ModalityTensor, 4> modality_set(const SkeletonSequence& seq, const GraphTopology& topo);

/// Single modality of the requested kind.
ModalityTensor derive(const SkeletonSequence& seq, const GraphTopology& topo, Kind kind);

}  // namespace bharnet::modality
