#pragma once

#include <string>
#include <vector>

#include "bharnet/skeleton.hpp"

namespace bharnet::preprocess {

enum class Centering { kBodyHip, kHandWrist, kNone };

Centering parse_centering(const std::string& name);
const char* to_string(Centering c);

struct PreprocessConfig {
  int target_length = 64;
  int max_gap = 5;
  Centering centering = Centering::kBodyHip;
  bool canonical = false;  // ablation only; the default pipeline stays calibration-free

  /// Throws ConfigError if target_length < 2 or max_gap < 0.
  void validate() const;
};

/// Frame t is valid iff every joint in joint_subset is observed at t.
std::vector<bool> detect_valid_frames(const SkeletonSequence& seq, const std::vector<int>& joint_subset);

/// Fills interior invalid runs of length <= max_gap, per joint and channel, by
/// linear interpolation between the bounding valid samples. Boundary runs and
/// longer runs are left invalid and zero-masked.
SkeletonSequence interpolate_gaps(const SkeletonSequence& seq, int max_gap);

/// Linear resampling at positions t_out*(T-1)/(target_length-1). Validity is
/// taken from the nearest source frame; when only the nearest neighbour is
/// valid its value is copied. Requires T >= 2.
SkeletonSequence resample_temporal(const SkeletonSequence& seq, int target_length);

/// Repeats the last frame (values and validity) until T == target_length.
SkeletonSequence pad_boundary(const SkeletonSequence& seq, int target_length);

/// Subtracts center_joints[0] from every valid non-dummy joint, frame by frame.
/// Frames whose center joint is missing are left untouched.
SkeletonSequence center_body(const SkeletonSequence& seq, const GraphTopology& topo);

/// Expresses each joint relative to its nearest ancestor-or-self listed in
/// topo.center_joints (per-hand wrist for hand graphs; hip for body joints of
/// the combined graph).
SkeletonSequence center_hand(const SkeletonSequence& seq, const GraphTopology& topo);

struct CanonicalResult {
  SkeletonSequence sequence;
  /// flagged[t * hands + h]: frame t of hand h was passed through unchanged
  /// (missing or degenerate anchors).
  std::vector<bool> flagged;
  int hands = 0;
};

/// First joint index of every 21-joint hand in a "hand", "hands" or "combined" sequence.
std::vector<int> hand_offsets(const std::string& topology_name);

/// Per-frame palm-anchored rigid re-expression of each hand. Origin at the
/// wrist, first axis towards the middle MCP, second axis the palm normal from
/// the wrist/index-MCP/pinky-MCP plane after Gram-Schmidt.
CanonicalResult canonical_transform(const SkeletonSequence& hand);

/// Joint groups used for frame validity: joints sharing the same nearest center ancestor.
std::vector<std::vector<int>> validity_groups(const GraphTopology& topo);

/// detect/interpolate -> resample or pad -> centering -> canonical (iff cfg.canonical).
SkeletonSequence run_pipeline(const SkeletonSequence& seq, const PreprocessConfig& cfg, const GraphTopology& topo);

}  // namespace bharnet::preprocess
