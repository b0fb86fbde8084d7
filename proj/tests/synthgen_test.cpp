#include <gtest/gtest.h>

#include "bharnet/errors.hpp"
#include "bharnet/sequence_io.hpp"
#include "bharnet/synthgen.hpp"
#include "test_util.hpp"

using namespace bharnet;
using namespace bharnet::synth;

namespace {

bool hand_frame_dropped(const SkeletonSequence& s, int t) {
  for (int v = layout::kLeftHandOffset; v < layout::kDummyOffset; ++v)
    if (s.is_valid(t, v)) return false;
  return true;
}

SynthConfig small() {
  SynthConfig cfg;
  cfg.body_motifs = 2;
  cfg.hand_motifs = 2;
  cfg.samples_per_class = 10;
  cfg.frames = 24;
  return cfg;
}

}  // namespace

TEST(Synth, CountsAndLabels) {
  const auto split = generate_dataset(small());
  EXPECT_EQ(split.sequences.size(), 40u);
  EXPECT_EQ(split.class_count, 4);
  std::vector<int> per(4, 0);
  for (const auto& s : split.sequences) ++per[static_cast<std::size_t>(s.label)];
  EXPECT_EQ(per, std::vector<int>(4, 10));
  for (int label = 0; label < 4; ++label)
    EXPECT_EQ(body_motif_of(small(), label) * 2 + hand_motif_of(small(), label), label);
}

TEST(Synth, EveryOutputValidates) {
  const auto topo = build_combined_topology();
  SynthConfig cfg = small();
  cfg.hand_dropout_rate = 0.4;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    cfg.seed = seed;
    for (const auto& s : generate_dataset(cfg).sequences) EXPECT_TRUE(validate_sequence(s, topo, 4).empty()) << s.id;
  }
}

TEST(Synth, DeterministicAndSplitsDiffer) {
  SynthConfig cfg = small();
  cfg.sigma_body = cfg.sigma_hand = 0.0;
  cfg.hand_dropout_rate = 0.0;
  const auto a = generate_dataset(cfg), b = generate_dataset(cfg);
  EXPECT_EQ(a.sequences, b.sequences);
  const auto test = generate_dataset(cfg, SplitTag::kTest);
  EXPECT_NE(a.sequences.front().coords, test.sequences.front().coords);
  cfg.seed = 1;
  EXPECT_NE(generate_dataset(cfg).sequences.front().coords, a.sequences.front().coords);
}

TEST(Synth, ClassesSharingBodyMotifHaveIdenticalBodyTemplates) {
  SynthConfig cfg;  // defaults: 3 x 3
  for (int bm = 0; bm < cfg.body_motifs; ++bm) {
    const auto ref = class_template(cfg, bm * cfg.hand_motifs);
    for (int hm = 1; hm < cfg.hand_motifs; ++hm) {
      const auto other = class_template(cfg, bm * cfg.hand_motifs + hm);
      double body = 0.0, hand = 0.0;
      for (int c = 0; c < 3; ++c)
        for (int t = 0; t < cfg.frames; ++t) {
          for (int v = 0; v < layout::kBodyJoints; ++v) body += std::abs(ref.at(c, t, v) - other.at(c, t, v));
          for (int v = layout::kLeftHandOffset; v < layout::kDummyOffset; ++v)
            hand += std::abs(ref.at(c, t, v) - other.at(c, t, v));
        }
      EXPECT_EQ(body, 0.0);
      EXPECT_GT(hand, 1e-3);
    }
  }
  // different body motifs do differ on the body
  const auto a = class_template(cfg, 0), b = class_template(cfg, cfg.hand_motifs);
  EXPECT_NE(body_stream(a).coords, body_stream(b).coords);
}

TEST(HandNoise, ZeroIsIdentityAndBodyUntouched) {
  const auto split = generate_dataset(small());
  EXPECT_EQ(inject_hand_noise(split, 0.0, 0.0, 3).sequences, split.sequences);
  const auto noisy = inject_hand_noise(split, 0.05, 0.5, 3);
  for (std::size_t i = 0; i < split.sequences.size(); ++i) {
    const auto& a = split.sequences[i];
    const auto& b = noisy.sequences[i];
    for (int c = 0; c < 3; ++c)
      for (int t = 0; t < a.frames; ++t)
        for (int v = 0; v < layout::kBodyJoints; ++v) ASSERT_EQ(a.at(c, t, v), b.at(c, t, v));
  }
  EXPECT_NE(noisy.sequences, split.sequences);
}

TEST(HandNoise, DropoutRateMonteCarlo) {
  SynthConfig cfg;
  cfg.body_motifs = 2;
  cfg.hand_motifs = 2;
  cfg.samples_per_class = 25;
  cfg.frames = 64;
  cfg.hand_dropout_rate = 0.0;
  const auto noisy = inject_hand_noise(generate_dataset(cfg), 0.0, 0.3, 11);
  double total = 0.0;
  for (const auto& s : noisy.sequences)
    for (int t = 0; t < s.frames; ++t) total += hand_frame_dropped(s, t);
  const double mean = total / 100.0;
  EXPECT_NEAR(mean, 0.3 * 64, 3.0);
}

TEST(Synth, ConfigValidation) {
  SynthConfig cfg;
  cfg.body_motifs = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = SynthConfig{};
  cfg.hand_dropout_rate = 1.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = SynthConfig{};
  cfg.sigma_hand = -0.1;
  EXPECT_THROW(cfg.validate(), ConfigError);
}
