#pragma once

#include <cstdint>

#include "bharnet/skeleton.hpp"

namespace bharnet::synth {

struct SynthConfig {
  int body_motifs = 3;
  int hand_motifs = 3;
  int samples_per_class = 40;
  int frames = 64;
  double sigma_body = 0.005;
  double sigma_hand = 0.03;
  double hand_dropout_rate = 0.1;
  std::uint64_t seed = 0;

  int class_count() const { return body_motifs * hand_motifs; }
  /// Throws ConfigError on out-of-range fields.
  void validate() const;
};

/// Label layout: label = body_motif * hand_motifs + hand_motif.
int body_motif_of(const SynthConfig& cfg, int label);
int hand_motif_of(const SynthConfig& cfg, int label);

/// Noiseless, jitter-free trajectory of one class on the combined topology.
SkeletonSequence class_template(const SynthConfig& cfg, int label);

/// class_count * samples_per_class combined-topology sequences with per-sample
/// jitter, Gaussian noise and hand-frame dropout. Deterministic in
/// (cfg.seed, tag); each sequence draws from its own derived seed stream.
DatasetSplit generate_dataset(const SynthConfig& cfg, SplitTag tag = SplitTag::kTrain);

/// Additive Gaussian noise on observed hand joints plus whole-frame hand
/// invalidation at dropout_rate. Body joints are not touched.
DatasetSplit inject_hand_noise(const DatasetSplit& split, double sigma, double dropout_rate, std::uint64_t seed);

}  // namespace bharnet::synth
