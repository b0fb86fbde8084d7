#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace bharnet {

/// Joint index layout shared by the body, hand and combined graphs.
namespace layout {
inline constexpr int kChannels = 3;

inline constexpr int kBodyJoints = 25;
inline constexpr int kHandJoints = 21;
inline constexpr int kDummyJoints = 4;
inline constexpr int kHandsJoints = 2 * kHandJoints;
inline constexpr int kCombinedJoints = kBodyJoints + 2 * kHandJoints + kDummyJoints;  // 71

// NTU 25-joint body (0-based).
inline constexpr int kHip = 0;  // base of spine
inline constexpr int kLeftWrist = 6;
inline constexpr int kRightWrist = 10;

// 21-joint hand, relative to the hand's first joint.
inline constexpr int kWrist = 0;
inline constexpr int kIndexMcp = 5;
inline constexpr int kMiddleMcp = 9;
inline constexpr int kPinkyMcp = 17;
inline constexpr int kThumbTip = 4;
inline constexpr int kIndexTip = 8;

// Offsets inside the combined graph; hands are ordered (left, right).
inline constexpr int kLeftHandOffset = kBodyJoints;
inline constexpr int kRightHandOffset = kBodyJoints + kHandJoints;
inline constexpr int kDummyOffset = kBodyJoints + 2 * kHandJoints;
}  // namespace layout

/// Kinematic forest over V joints. Immutable once built; the constructor
/// enforces the structural invariants and throws InputError otherwise.
class GraphTopology {
 public:
  using Edge = std::pair<int, int>;  // (parent, child)

  GraphTopology(std::string name, int joint_count, std::vector<Edge> edges,
                std::vector<bool> dummy_mask, std::vector<int> center_joints);

  const std::string& name() const { return name_; }
  int joint_count() const { return joint_count_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<bool>& dummy_mask() const { return dummy_mask_; }
  const std::vector<int>& center_joints() const { return center_joints_; }

  bool is_dummy(int v) const { return dummy_mask_[static_cast<std::size_t>(v)]; }
  /// Parent of v, or -1 for roots and dummy joints.
  int parent(int v) const { return parent_[static_cast<std::size_t>(v)]; }
  const std::vector<int>& parents() const { return parent_; }

  bool operator==(const GraphTopology& other) const;

 private:
  std::string name_;
  int joint_count_;
  std::vector<Edge> edges_;
  std::vector<bool> dummy_mask_;
  std::vector<int> center_joints_;
  std::vector<int> parent_;
};

GraphTopology build_body_topology();
GraphTopology build_hand_topology();
/// Left and right hands as two disjoint 21-joint trees (the hand-stream graph).
GraphTopology build_two_hand_topology();
/// Body + left hand + right hand + 4 zero-masked dummy joints.
GraphTopology build_combined_topology();

/// Looks up one of "body", "hand", "hands", "combined"; throws InputError otherwise.
GraphTopology topology_by_name(const std::string& name);

/// One subject's skeleton track. coords is laid out [c][t][v], valid is [t][v].
struct SkeletonSequence {
  std::string id;
  int label = 0;
  double fps = 30.0;
  int channels = layout::kChannels;
  int frames = 0;
  int joints = 0;
  std::string topology_name;
  std::vector<double> coords;
  std::vector<bool> valid;

  static SkeletonSequence zeros(std::string id, int label, int frames, const GraphTopology& topo,
                                double fps = 30.0);

  std::size_t index(int c, int t, int v) const {
    return (static_cast<std::size_t>(c) * static_cast<std::size_t>(frames) + static_cast<std::size_t>(t)) *
               static_cast<std::size_t>(joints) +
           static_cast<std::size_t>(v);
  }
  double& at(int c, int t, int v) { return coords[index(c, t, v)]; }
  double at(int c, int t, int v) const { return coords[index(c, t, v)]; }

  std::size_t valid_index(int t, int v) const {
    return static_cast<std::size_t>(t) * static_cast<std::size_t>(joints) + static_cast<std::size_t>(v);
  }
  bool is_valid(int t, int v) const { return valid[valid_index(t, v)]; }
  void set_valid(int t, int v, bool flag) { valid[valid_index(t, v)] = flag; }

  /// Marks (t, v) invalid and zeroes its coordinates.
  void mask(int t, int v);

  bool operator==(const SkeletonSequence&) const = default;
};

enum class SplitTag { kTrain, kVal, kTest };

const char* to_string(SplitTag tag);

struct DatasetSplit {
  std::vector<SkeletonSequence> sequences;
  int class_count = 0;
  SplitTag split_tag = SplitTag::kTrain;
};

struct Violation {
  enum class Kind { kShape, kTopology, kNonFinite, kZeroMask, kLabel, kFps };
  Kind kind;
  std::string message;
};

/// Checks every SkeletonSequence invariant against topo. Violations are
/// returned as data; an empty report means the sequence is well formed.
std::vector<Violation> validate_sequence(const SkeletonSequence& seq, const GraphTopology& topo,
                                         int class_count = 0);

/// Throws InputError unless every label < class_count and the split is non-empty.
void check_split(const DatasetSplit& split);

/// Copies the joint range [first, first + count) into a sequence on topology `target`.
SkeletonSequence extract_joints(const SkeletonSequence& seq, int first, int count,
                                const GraphTopology& target);

/// Body stream (25 joints) of a combined-topology sequence.
SkeletonSequence body_stream(const SkeletonSequence& combined);
/// Hand stream (left + right, 42 joints) of a combined-topology sequence.
SkeletonSequence hand_stream(const SkeletonSequence& combined);

}  // namespace bharnet
