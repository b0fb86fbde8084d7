#include <gtest/gtest.h>

#include <cmath>

#include "bharnet/errors.hpp"
#include "bharnet/preprocess.hpp"
#include "bharnet/sequence_io.hpp"
#include "test_util.hpp"

using namespace bharnet;
using namespace bharnet::preprocess;

namespace {

// Rotation about an arbitrary axis (Rodrigues), applied to every joint.
SkeletonSequence rigid(const SkeletonSequence& s, const double axis_in[3], double angle, const double shift[3]) {
  const double n = std::sqrt(axis_in[0] * axis_in[0] + axis_in[1] * axis_in[1] + axis_in[2] * axis_in[2]);
  const double k[3] = {axis_in[0] / n, axis_in[1] / n, axis_in[2] / n};
  const double c = std::cos(angle), sn = std::sin(angle);
  double R[3][3];
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) R[i][j] = (i == j ? c : 0.0) + (1 - c) * k[i] * k[j];
  R[0][1] -= sn * k[2];
  R[0][2] += sn * k[1];
  R[1][0] += sn * k[2];
  R[1][2] -= sn * k[0];
  R[2][0] -= sn * k[1];
  R[2][1] += sn * k[0];
  auto out = s;
  for (int t = 0; t < s.frames; ++t)
    for (int v = 0; v < s.joints; ++v)
      for (int i = 0; i < 3; ++i) {
        double acc = shift[i];
        for (int j = 0; j < 3; ++j) acc += R[i][j] * s.at(j, t, v);
        out.at(i, t, v) = acc;
      }
  return out;
}

}  // namespace

TEST(DetectValidFrames, SubsetSemantics) {
  testutil::Gen gen(1);
  const auto topo = build_body_topology();
  auto seq = gen.sequence(topo, 6);
  auto all = detect_valid_frames(seq, {0, 1, 2});
  EXPECT_EQ(all, std::vector<bool>(6, true));
  seq.mask(3, 2);
  auto with = detect_valid_frames(seq, {0, 1, 2});
  EXPECT_FALSE(with[3]);
  EXPECT_EQ(std::count(with.begin(), with.end(), false), 1);
  EXPECT_EQ(detect_valid_frames(seq, {0, 1}), std::vector<bool>(6, true));
  EXPECT_THROW(detect_valid_frames(seq, {25}), InputError);
}

TEST(InterpolateGaps, MidpointExample) {
  const auto topo = build_hand_topology();
  auto seq = SkeletonSequence::zeros("m", 0, 3, topo);
  for (int t = 0; t < 3; ++t)
    for (int v = 0; v < 21; ++v) seq.set_valid(t, v, true);
  seq.at(0, 2, 4) = 1.0;
  seq.mask(1, 4);
  const auto out = interpolate_gaps(seq, 1);
  EXPECT_TRUE(out.is_valid(1, 4));
  EXPECT_DOUBLE_EQ(out.at(0, 1, 4), 0.5);
}

TEST(InterpolateGaps, IdentityOnFullyValid) {
  testutil::Gen gen(2);
  const auto seq = gen.sequence(build_body_topology(), 9);
  EXPECT_EQ(interpolate_gaps(seq, 3), seq);
}

// Property: random gap patterns; runs <= max_gap interior are filled with the
// straight line between neighbours, everything else stays masked at zero.
TEST(InterpolateGaps, FillsOnlyShortInteriorGaps) {
  testutil::Gen gen(3);
  const auto topo = build_body_topology();
  for (int trial = 0; trial < 200; ++trial) {
    const int T = gen.integer(2, 24);
    const int max_gap = gen.integer(0, 5);
    auto seq = gen.sequence(topo, T);
    const int v = gen.integer(0, 24);
    for (int t = 0; t < T; ++t)
      if (gen.coin(0.35)) seq.mask(t, v);
    const auto out = interpolate_gaps(seq, max_gap);
    int t = 0;
    while (t < T) {
      if (seq.is_valid(t, v)) {
        EXPECT_TRUE(out.is_valid(t, v));
        for (int c = 0; c < 3; ++c) EXPECT_EQ(out.at(c, t, v), seq.at(c, t, v));
        ++t;
        continue;
      }
      int end = t;
      while (end < T && !seq.is_valid(end, v)) ++end;
      const int len = end - t;
      const bool interior = t > 0 && end < T;
      for (int u = t; u < end; ++u) {
        if (interior && len <= max_gap) {
          ASSERT_TRUE(out.is_valid(u, v));
          const double a = static_cast<double>(u - (t - 1)) / (end - (t - 1));
          for (int c = 0; c < 3; ++c)
            EXPECT_NEAR(out.at(c, u, v), (1 - a) * seq.at(c, t - 1, v) + a * seq.at(c, end, v), 1e-12);
        } else {
          ASSERT_FALSE(out.is_valid(u, v));
          for (int c = 0; c < 3; ++c) EXPECT_EQ(out.at(c, u, v), 0.0);
        }
      }
      t = end;
    }
  }
}

TEST(InterpolateGaps, LongGapUntouched) {
  testutil::Gen gen(4);
  auto seq = gen.sequence(build_hand_topology(), 6);
  for (int t = 1; t <= 3; ++t) seq.mask(t, 2);
  const auto out = interpolate_gaps(seq, 1);
  for (int t = 1; t <= 3; ++t) {
    EXPECT_FALSE(out.is_valid(t, 2));
    EXPECT_EQ(out.at(0, t, 2), 0.0);
  }
}

TEST(Resample, LinearSignalsAreFixedPoints) {
  testutil::Gen gen(5);
  const auto topo = build_hand_topology();
  for (int trial = 0; trial < 100; ++trial) {
    const int T = gen.integer(2, 80);
    const int L = gen.integer(2, 80);
    auto seq = SkeletonSequence::zeros("r", 0, T, topo);
    std::vector<double> a(63), b(63);
    for (int i = 0; i < 63; ++i) {
      a[i] = gen.uniform(-1, 1);
      b[i] = gen.uniform(-0.1, 0.1);
    }
    for (int c = 0; c < 3; ++c)
      for (int t = 0; t < T; ++t)
        for (int v = 0; v < 21; ++v) {
          seq.at(c, t, v) = a[c * 21 + v] + b[c * 21 + v] * t;
          seq.set_valid(t, v, true);
        }
    const auto out = resample_temporal(seq, L);
    ASSERT_EQ(out.frames, L);
    double worst = 0.0;
    for (int c = 0; c < 3; ++c)
      for (int t = 0; t < L; ++t)
        for (int v = 0; v < 21; ++v) {
          const double pos = static_cast<double>(t) * (T - 1) / (L - 1);
          worst = std::max(worst, std::abs(out.at(c, t, v) - (a[c * 21 + v] + b[c * 21 + v] * pos)));
        }
    // exact up to the rounding of a two-term linear blend
    EXPECT_LE(worst, 1e-14);
  }
}

TEST(Resample, SameLengthIsIdentityAndShortInputRejected) {
  testutil::Gen gen(6);
  const auto seq = gen.sequence(build_body_topology(), 7);
  EXPECT_EQ(resample_temporal(seq, 7), seq);
  EXPECT_THROW(resample_temporal(gen.sequence(build_body_topology(), 1), 4), InputError);
}

TEST(Pad, RepeatsLastFrame) {
  testutil::Gen gen(7);
  auto seq = gen.sequence(build_body_topology(), 5);
  seq.mask(4, 3);
  const auto out = pad_boundary(seq, 8);
  ASSERT_EQ(out.frames, 8);
  for (int t = 5; t < 8; ++t)
    for (int v = 0; v < 25; ++v) {
      EXPECT_EQ(out.is_valid(t, v), seq.is_valid(4, v));
      for (int c = 0; c < 3; ++c) EXPECT_EQ(out.at(c, t, v), seq.at(c, 4, v));
    }
  EXPECT_EQ(pad_boundary(seq, 5), seq);
  EXPECT_THROW(pad_boundary(seq, 4), InputError);
}

TEST(Center, BodyHipToOriginAndDistancesPreserved) {
  testutil::Gen gen(8);
  const auto topo = build_body_topology();
  for (int trial = 0; trial < 50; ++trial) {
    auto seq = gen.sequence(topo, 4);
    for (int c = 0; c < 3; ++c)
      for (int t = 0; t < 4; ++t)
        for (int v = 0; v < 25; ++v) seq.at(c, t, v) *= 1000.0;  // large offsets stress cancellation
    seq.mask(1, 13);
    const auto out = center_body(seq, topo);
    for (int t = 0; t < 4; ++t) {
      for (int c = 0; c < 3; ++c) EXPECT_EQ(out.at(c, t, 0), 0.0);
      for (int a = 0; a < 25; ++a)
        for (int b = a + 1; b < 25; ++b) {
          if (!seq.is_valid(t, a) || !seq.is_valid(t, b)) continue;
          EXPECT_NEAR(testutil::dist(out, t, a, b), testutil::dist(seq, t, a, b),
                      1e-12 * std::max(1.0, testutil::dist(seq, t, a, b)));
        }
    }
    for (int c = 0; c < 3; ++c) EXPECT_EQ(out.at(c, 1, 13), 0.0);
  }
}

TEST(Center, HandsCenteredIndependentlyAndTranslationFree) {
  testutil::Gen gen(9);
  const auto topo = build_combined_topology();
  const auto seq = gen.sequence(topo, 3);
  const double axis[3] = {0, 0, 1};
  const double shift[3] = {0.7, -2.0, 3.5};
  const auto moved = rigid(seq, axis, 0.0, shift);
  const auto a = center_hand(seq, topo);
  const auto b = center_hand(moved, topo);
  for (int t = 0; t < 3; ++t)
    for (int c = 0; c < 3; ++c) {
      EXPECT_EQ(a.at(c, t, layout::kLeftHandOffset), 0.0);
      EXPECT_EQ(a.at(c, t, layout::kRightHandOffset), 0.0);
      for (int v = layout::kLeftHandOffset; v < layout::kDummyOffset; ++v) EXPECT_NEAR(a.at(c, t, v), b.at(c, t, v), 1e-12);
      // right-hand coordinates do not depend on the left wrist
      const int rv = layout::kRightHandOffset + 8;
      EXPECT_NEAR(a.at(c, t, rv), seq.at(c, t, rv) - seq.at(c, t, layout::kRightHandOffset), 1e-15);
    }
}

TEST(Canonical, WristAtOriginAndRotationInvariant) {
  testutil::Gen gen(10);
  const auto topo = build_hand_topology();
  for (int trial = 0; trial < 30; ++trial) {
    const auto seq = gen.sequence(topo, 3);
    const double axis[3] = {gen.uniform(-1, 1), gen.uniform(-1, 1), gen.uniform(0.1, 1)};
    const double shift[3] = {gen.uniform(-1, 1), gen.uniform(-1, 1), gen.uniform(-1, 1)};
    const auto a = canonical_transform(seq);
    const auto b = canonical_transform(rigid(seq, axis, gen.uniform(-3, 3), shift));
    for (int t = 0; t < 3; ++t)
      for (int c = 0; c < 3; ++c) {
        EXPECT_NEAR(a.sequence.at(c, t, 0), 0.0, 1e-15);
        for (int v = 0; v < 21; ++v) EXPECT_NEAR(a.sequence.at(c, t, v), b.sequence.at(c, t, v), 1e-9);
      }
  }
}

TEST(Canonical, DegenerateAndMissingAnchorsAreFlagged) {
  const auto topo = build_hand_topology();
  auto seq = SkeletonSequence::zeros("d", 0, 2, topo);
  for (int t = 0; t < 2; ++t)
    for (int v = 0; v < 21; ++v) {
      seq.set_valid(t, v, true);
      seq.at(0, t, v) = 0.1 * v;  // every joint on one line
    }
  seq.mask(1, layout::kPinkyMcp);
  const auto out = canonical_transform(seq);
  EXPECT_TRUE(out.flagged[0]);
  EXPECT_TRUE(out.flagged[1]);
  EXPECT_EQ(out.sequence, seq);
}

TEST(Canonical, LocalNoiseSpreadsOnlyInCanonicalSpace) {
  testutil::Gen gen(11);
  const auto topo = build_hand_topology();
  const auto seq = gen.sequence(topo, 1);
  auto bumped = seq;
  bumped.at(1, 0, layout::kIndexMcp) += 0.01;
  const auto ca = canonical_transform(seq).sequence;
  const auto cb = canonical_transform(bumped).sequence;
  double native = 0.0, canon = 0.0;
  for (int v = 0; v < 21; ++v) {
    if (v == layout::kIndexMcp) continue;
    for (int c = 0; c < 3; ++c) {
      native = std::max(native, std::abs(bumped.at(c, 0, v) - seq.at(c, 0, v)));
      canon = std::max(canon, std::abs(cb.at(c, 0, v) - ca.at(c, 0, v)));
    }
  }
  EXPECT_EQ(native, 0.0);
  EXPECT_GT(canon, 0.0);
}

TEST(Pipeline, OutputLengthDeterminismAndIdempotentCentering) {
  testutil::Gen gen(12);
  const auto topo = build_combined_topology();
  for (int trial = 0; trial < 20; ++trial) {
    auto seq = gen.sequence(topo, gen.integer(2, 90));
    for (int t = 0; t < seq.frames; ++t)
      if (gen.coin(0.1)) seq.mask(t, gen.integer(0, 66));
    PreprocessConfig cfg{gen.integer(2, 64), gen.integer(0, 5), Centering::kHandWrist, gen.coin()};
    const auto a = run_pipeline(seq, cfg, topo);
    const auto b = run_pipeline(seq, cfg, topo);
    EXPECT_EQ(a.frames, cfg.target_length);
    EXPECT_EQ(format_sequence(a), format_sequence(b));
    EXPECT_TRUE(validate_sequence(a, topo).empty());
  }
}

TEST(Pipeline, DefaultSkipsCanonicalStage) {
  testutil::Gen gen(13);
  const auto topo = build_two_hand_topology();
  const auto seq = gen.sequence(topo, 8);
  PreprocessConfig cfg{8, 2, Centering::kHandWrist, false};
  EXPECT_EQ(run_pipeline(seq, cfg, topo), center_hand(seq, topo));
  cfg.canonical = true;
  EXPECT_EQ(run_pipeline(seq, cfg, topo), canonical_transform(center_hand(seq, topo)).sequence);
}

TEST(Pipeline, ConfigValidation) {
  EXPECT_THROW((PreprocessConfig{1, 2, Centering::kBodyHip, false}.validate()), ConfigError);
  EXPECT_THROW((PreprocessConfig{8, -1, Centering::kBodyHip, false}.validate()), ConfigError);
  EXPECT_THROW(parse_centering("navel"), ConfigError);
}
