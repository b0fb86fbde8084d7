#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "bharnet/errors.hpp"
#include "bharnet/sequence_io.hpp"
#include "bharnet/skeleton.hpp"
#include "test_util.hpp"

using namespace bharnet;

namespace {

bool has_kind(const std::vector<Violation>& report, Violation::Kind kind) {
  for (const auto& v : report)
    if (v.kind == kind) return true;
  return false;
}

int roots_of(const GraphTopology& topo) {
  int roots = 0;
  for (int v = 0; v < topo.joint_count(); ++v)
    if (!topo.is_dummy(v) && topo.parent(v) == -1) ++roots;
  return roots;
}

}  // namespace

TEST(Topology, BodyIsTreeOver25Joints) {
  const auto body = build_body_topology();
  EXPECT_EQ(body.joint_count(), 25);
  EXPECT_EQ(body.edges().size(), 24u);
  EXPECT_EQ(roots_of(body), 1);
  EXPECT_EQ(body.parent(layout::kHip), -1);
}

TEST(Topology, HandIsTreeOver21Joints) {
  const auto hand = build_hand_topology();
  EXPECT_EQ(hand.joint_count(), 21);
  EXPECT_EQ(hand.edges().size(), 20u);
  EXPECT_EQ(roots_of(hand), 1);
  // every fingertip reaches the wrist in exactly four hops
  for (int tip : {4, 8, 12, 16, 20}) {
    int hops = 0;
    for (int v = tip; v != layout::kWrist; v = hand.parent(v)) ++hops;
    EXPECT_EQ(hops, 4);
  }
}

TEST(Topology, BuildersAreDeterministic) {
  EXPECT_EQ(build_body_topology(), build_body_topology());
  EXPECT_EQ(build_combined_topology(), build_combined_topology());
}

TEST(Topology, CombinedHas71JointsAndTwoCrossEdges) {
  const auto topo = build_combined_topology();
  EXPECT_EQ(topo.joint_count(), 71);
  int cross = 0;
  for (const auto& [p, c] : topo.edges()) {
    const bool p_body = p < layout::kBodyJoints;
    const bool c_body = c < layout::kBodyJoints;
    if (p_body != c_body) ++cross;
  }
  EXPECT_EQ(cross, 2);
  EXPECT_EQ(topo.parent(layout::kLeftHandOffset), layout::kLeftWrist);
  EXPECT_EQ(topo.parent(layout::kRightHandOffset), layout::kRightWrist);
  int dummies = 0;
  for (int v = 0; v < topo.joint_count(); ++v) dummies += topo.is_dummy(v);
  EXPECT_EQ(dummies, 4);
  for (const auto& [p, c] : topo.edges()) {
    EXPECT_FALSE(topo.is_dummy(p));
    EXPECT_FALSE(topo.is_dummy(c));
  }
  EXPECT_EQ(topo.edges().size(), 24u + 20u + 20u + 2u);
}

TEST(Topology, RejectsCyclesAndBadIndices) {
  EXPECT_THROW(GraphTopology("c", 3, {{0, 1}, {1, 2}, {2, 0}}, std::vector<bool>(3, false), {0}), InputError);
  EXPECT_THROW(GraphTopology("r", 2, {{0, 5}}, std::vector<bool>(2, false), {0}), InputError);
  EXPECT_THROW(topology_by_name("tail"), InputError);
}

TEST(Validate, WellFormedSequenceHasEmptyReport) {
  testutil::Gen gen(1);
  const auto topo = build_combined_topology();
  EXPECT_TRUE(validate_sequence(gen.sequence(topo, 6), topo, 1).empty());
}

TEST(Validate, NonFiniteCoordinateIsReported) {
  testutil::Gen gen(2);
  const auto topo = build_body_topology();
  auto seq = gen.sequence(topo, 4);
  seq.at(1, 2, 3) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_TRUE(has_kind(validate_sequence(seq, topo), Violation::Kind::kNonFinite));
}

TEST(Validate, InvalidButNonZeroIsReported) {
  testutil::Gen gen(3);
  const auto topo = build_body_topology();
  auto seq = gen.sequence(topo, 4);
  seq.set_valid(1, 7, false);
  EXPECT_TRUE(has_kind(validate_sequence(seq, topo), Violation::Kind::kZeroMask));
  seq.mask(1, 7);
  EXPECT_TRUE(validate_sequence(seq, topo).empty());
}

TEST(Validate, ShapeTopologyLabelAndDummyViolations) {
  testutil::Gen gen(4);
  const auto combined = build_combined_topology();
  auto seq = gen.sequence(combined, 3, 5);
  EXPECT_TRUE(has_kind(validate_sequence(seq, combined, 4), Violation::Kind::kLabel));
  EXPECT_TRUE(has_kind(validate_sequence(seq, build_body_topology()), Violation::Kind::kTopology));
  auto dummy = seq;
  dummy.set_valid(0, layout::kDummyOffset, true);
  EXPECT_TRUE(has_kind(validate_sequence(dummy, combined), Violation::Kind::kZeroMask));
  auto shape = seq;
  shape.coords.pop_back();
  EXPECT_TRUE(has_kind(validate_sequence(shape, combined), Violation::Kind::kShape));
}

TEST(Split, CheckSplitRejectsEmptyAndOutOfRange) {
  DatasetSplit split;
  split.class_count = 2;
  EXPECT_THROW(check_split(split), InputError);
  testutil::Gen gen(5);
  split.sequences.push_back(gen.sequence(build_body_topology(), 2, 3));
  EXPECT_THROW(check_split(split), InputError);
  split.sequences.back().label = 1;
  EXPECT_NO_THROW(check_split(split));
}

TEST(Streams, BodyAndHandExtractionCopiesRanges) {
  testutil::Gen gen(6);
  const auto seq = gen.sequence(build_combined_topology(), 5);
  const auto body = body_stream(seq);
  const auto hand = hand_stream(seq);
  EXPECT_EQ(body.joints, 25);
  EXPECT_EQ(hand.joints, 42);
  EXPECT_EQ(hand.topology_name, "hands");
  for (int c = 0; c < 3; ++c)
    for (int t = 0; t < 5; ++t) {
      for (int v = 0; v < 25; ++v) EXPECT_EQ(body.at(c, t, v), seq.at(c, t, v));
      for (int v = 0; v < 42; ++v) EXPECT_EQ(hand.at(c, t, v), seq.at(c, t, 25 + v));
    }
}

TEST(SequenceIo, RoundTripIsExact) {
  testutil::Gen gen(7);
  std::vector<SkeletonSequence> seqs;
  for (int i = 0; i < 5; ++i) {
    auto s = gen.sequence(build_combined_topology(), gen.integer(1, 6), gen.integer(0, 8));
    s.mask(0, 30);
    seqs.push_back(s);
  }
  std::stringstream io;
  write_sequences(io, seqs);
  EXPECT_EQ(read_sequences(io), seqs);
}

TEST(SequenceIo, RejectsLengthMismatchAndMissingFields) {
  testutil::Gen gen(8);
  const auto line = format_sequence(gen.sequence(build_body_topology(), 2));
  EXPECT_NO_THROW(parse_sequence(line));
  EXPECT_THROW(parse_sequence("{\"id\":\"x\"}"), InputError);
  EXPECT_THROW(parse_sequence("not json"), InputError);
  auto broken = line;
  const auto pos = broken.find("\"coords\":[");
  ASSERT_NE(pos, std::string::npos);
  broken.insert(pos + 10, "0.5,");
  EXPECT_THROW(parse_sequence(broken), InputError);
}
