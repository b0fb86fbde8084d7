#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "bharnet/errors.hpp"
#include "bharnet/harness.hpp"
#include "bharnet/synthgen.hpp"
#include "test_util.hpp"

using namespace bharnet;
using namespace bharnet::harness;
using nn::Tensor;

namespace {

synth::SynthConfig tiny_synth(std::uint64_t seed = 0) {
  synth::SynthConfig cfg;
  cfg.body_motifs = 2;
  cfg.hand_motifs = 2;
  cfg.samples_per_class = 5;
  cfg.frames = 16;
  cfg.seed = seed;
  return cfg;
}

StreamPreprocess tiny_pre() {
  StreamPreprocess p;
  p.body.target_length = 8;
  p.hand.target_length = 8;
  return p;
}

TrainConfig tiny_train(int epochs = 2) {
  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.lr = 0.02;
  cfg.batch_size = 4;
  cfg.channels = {4, 6};
  return cfg;
}

const PreparedSplit& train_split() {
  static const PreparedSplit split = prepare(synth::generate_dataset(tiny_synth()), tiny_pre());
  return split;
}

const PreparedSplit& test_split() {
  static const PreparedSplit split = prepare(synth::generate_dataset(tiny_synth(), SplitTag::kTest), tiny_pre());
  return split;
}

struct Pretrained {
  nn::Checkpoint body, hand;
};

const Pretrained& pretrained() {
  static const Pretrained p{pretrain_stream(train_split(), Stream::kBody, tiny_train()).checkpoint,
                            pretrain_stream(train_split(), Stream::kHand, tiny_train()).checkpoint};
  return p;
}

int dropped_frames(const SkeletonSequence& s) {
  int n = 0;
  for (int t = 0; t < s.frames; ++t) {
    bool any = false;
    for (int v = 0; v < s.joints; ++v) any = any || s.is_valid(t, v);
    n += !any;
  }
  return n;
}

}  // namespace

TEST(Prepare, StreamsHaveExpectedShapes) {
  const auto& split = train_split();
  ASSERT_EQ(split.samples.size(), 20u);
  EXPECT_EQ(split.class_count, 4);
  EXPECT_EQ(split.samples[0].body.joints, 25);
  EXPECT_EQ(split.samples[0].hand.joints, 42);
  EXPECT_EQ(split.samples[0].body.frames, 8);
  EXPECT_EQ(split.raw.size(), 20u);
}

TEST(Pretrain, LossDecreasesAndIsDeterministic) {
  const auto a = pretrain_stream(train_split(), Stream::kBody, tiny_train());
  ASSERT_EQ(a.report.epochs.size(), 2u);
  EXPECT_LT(a.report.epochs.back().total, a.report.epochs.front().total);
  const auto b = pretrain_stream(train_split(), Stream::kBody, tiny_train());
  EXPECT_EQ(nn::format_checkpoint(a.checkpoint), nn::format_checkpoint(b.checkpoint));
  EXPECT_EQ(a.report.losses_csv(), b.report.losses_csv());
  EXPECT_EQ(a.checkpoint.stream, "body");
}

TEST(Pretrain, EmptySplitIsInputError) {
  PreparedSplit empty;
  empty.class_count = 4;
  EXPECT_THROW(pretrain_stream(empty, Stream::kHand, tiny_train()), InputError);
}

TEST(Pretrain, InputScaleIsFrozenAndPositive) {
  const auto& ck = pretrained().hand;
  const auto& scale = ck.params.get("S.input_scale");
  EXPECT_FALSE(scale.requires_grad());
  for (double s : scale.value().values()) EXPECT_GT(s, 0.0);
}

TEST(Finetune, LossDecreasesDeterministicAndLoadsPretrained) {
  const auto& p = pretrained();
  const auto cfg = tiny_train(3);
  const auto a = finetune_dual(train_split(), p.body, p.hand, nn::Variant::kE, {1, 1, 1}, cfg);
  const auto b = finetune_dual(train_split(), p.body, p.hand, nn::Variant::kE, {1, 1, 1}, cfg);
  EXPECT_LT(a.report.epochs.back().total, a.report.epochs.front().total);
  EXPECT_EQ(nn::format_checkpoint(a.checkpoint), nn::format_checkpoint(b.checkpoint));

  const nn::DualStreamNet net(nn::ModelSpec::for_variant(nn::Variant::kE, 4, cfg.channels), build_body_topology(),
                              build_two_hand_topology());
  auto params = net.init_params(0);
  load_pretrained(params, net, p.body, p.hand);
  for (const char* br : {"BE", "BI"})
    EXPECT_EQ(params.get(std::string(br) + ".block0.graph").value(), p.body.params.get("S.block0.graph").value());
  for (const char* br : {"HE", "HI"})
    EXPECT_EQ(params.get(std::string(br) + ".head.weight").value(), p.hand.params.get("S.head.weight").value());
}

TEST(Finetune, ShapeMismatchIsConfigError) {
  const auto& p = pretrained();
  auto cfg = tiny_train(1);
  cfg.channels = {8, 8};
  EXPECT_THROW(finetune_dual(train_split(), p.body, p.hand, nn::Variant::kE, {1, 1, 1}, cfg), ConfigError);
  EXPECT_EQ(pretrain_widths(nn::Variant::kP, {8, 16}), (std::vector<int>{4, 8}));
}

// With lambda = (1, 0, 0) in variant E only the interactive branches are
// supervised: expert parameters get no gradient, and the gate gradient is the
// sum of what each interactive head's cross-entropy sends back.
TEST(Finetune, IndividualOnlyGradientAudit) {
  const auto& p = pretrained();
  const nn::DualStreamNet net(nn::ModelSpec::for_variant(nn::Variant::kE, 4, {4, 6}), build_body_topology(),
                              build_two_hand_topology());
  auto params = net.init_params(1);
  load_pretrained(params, net, p.body, p.hand);
  testutil::Gen gen(3);
  const auto xb = nn::Var::constant(gen.tensor({2, 3, 8, 25}));
  const auto xh = nn::Var::constant(gen.tensor({2, 3, 8, 42}));
  const std::vector<int> y{1, 3};

  nn::backward(fusion::loss_total(net.forward(params, xb, xh), nn::Variant::kE, y, {1, 0, 0}));
  const auto joint = params.gradients();
  for (const auto& [name, g] : joint)
    if (name.rfind("BE.", 0) == 0 || name.rfind("HE.", 0) == 0) {
      for (double x : g.values()) EXPECT_EQ(x, 0.0) << name;
    }

  std::map<std::string, Tensor> split_sum;
  for (auto b : {nn::Branch::kBI, nn::Branch::kHI}) {
    params.zero_grad();
    const auto l = net.forward(params, xb, xh);
    nn::backward(fusion::softmax_cross_entropy(l.at(b), y));
    for (const auto& [name, g] : params.gradients()) {
      auto [it, fresh] = split_sum.try_emplace(name, g);
      if (!fresh)
        for (std::size_t i = 0; i < g.size(); ++i) it->second[i] += g[i];
    }
  }
  double gate_mag = 0.0;
  for (const auto& [name, g] : joint) {
    if (name.find(".gate") == std::string::npos) continue;
    for (std::size_t i = 0; i < g.size(); ++i) {
      EXPECT_NEAR(g[i], split_sum[name][i], 1e-12) << name;
      gate_mag += std::abs(g[i]);
    }
  }
  EXPECT_GT(gate_mag, 0.0);
}

TEST(FrameDrop, CountsIdentityAndReproducibility) {
  testutil::Gen gen(4);
  const auto body = build_body_topology();
  const auto seq = gen.sequence(body, 64);
  EXPECT_EQ(frame_drop(seq, 0.0, 1), seq);
  const auto half = frame_drop(seq, 0.5, 1);
  EXPECT_EQ(dropped_frames(half), 32);
  const auto count = [](const SkeletonSequence& s) { return std::count(s.valid.begin(), s.valid.end(), true); };
  EXPECT_EQ(count(seq) - count(half), 32 * 25);
  EXPECT_EQ(frame_drop(seq, 0.5, 1), half);
  EXPECT_EQ(dropped_frames(frame_drop(gen.sequence(body, 30), 0.1, 2)), 3);
  EXPECT_EQ(dropped_frames(frame_drop(gen.sequence(body, 10), 0.25, 2)), 3);

  std::set<std::vector<bool>> patterns;
  for (std::uint64_t s = 0; s < 100; ++s) patterns.insert(frame_drop(seq, 0.25, s).valid);
  EXPECT_GE(patterns.size(), 99u);
}

TEST(FrameDrop, HandScopeLeavesBodyAlone) {
  testutil::Gen gen(5);
  const auto seq = gen.sequence(build_combined_topology(), 20);
  const auto out = frame_drop(seq, 0.5, 9, DropScope::kHand);
  int hand_dropped = 0;
  for (int t = 0; t < 20; ++t) {
    for (int v = 0; v < layout::kBodyJoints; ++v) ASSERT_TRUE(out.is_valid(t, v));
    bool gone = true;
    for (int v = layout::kLeftHandOffset; v < layout::kDummyOffset; ++v) gone = gone && !out.is_valid(t, v);
    hand_dropped += gone;
  }
  EXPECT_EQ(hand_dropped, 10);
  EXPECT_EQ(parse_drop_scope("hand"), DropScope::kHand);
}

TEST(Evaluate, CleanRateDeterminismAndRobustnessReport) {
  const auto& p = pretrained();
  const auto ck = finetune_dual(train_split(), p.body, p.hand, nn::Variant::kE, {1, 1, 1}, tiny_train(1)).checkpoint;
  const auto& test = test_split();
  const double clean = evaluate(ck, test, 0.0, 0);
  EXPECT_EQ(evaluate(ck, test, 0.0, 5), clean);
  EXPECT_EQ(evaluate(ck, test, 0.5, 3), evaluate(ck, test, 0.5, 3));
  const auto detail = evaluate_detailed(ck, test, {});
  EXPECT_EQ(detail.logits.shape(), (nn::Shape{20, 4}));
  EXPECT_EQ(detail.accuracy, clean);

  const auto rep = robustness_sweep(ck, test, {0.0, 0.25, 0.5}, {0, 1});
  EXPECT_EQ(rep.rates, (std::vector<double>{0.0, 0.25, 0.5}));
  EXPECT_EQ(rep.accuracy[0], clean);
  EXPECT_NEAR(rep.accuracy[2], 0.5 * (rep.per_seed[2][0] + rep.per_seed[2][1]), 1e-15);
  EXPECT_EQ(rep.to_csv().substr(0, 26), "rate,accuracy,seed_0,seed_");
  // pure: evaluating does not alter the checkpoint
  EXPECT_EQ(evaluate(ck, test, 0.0, 0), clean);
}

TEST(Evaluate, ConstantPredictorScoresOneOverK) {
  const auto& p = pretrained();
  auto ck = finetune_dual(train_split(), p.body, p.hand, nn::Variant::kB, {1, 1, 1}, tiny_train(1)).checkpoint;
  for (const char* br : {"BE", "HE"}) {
    const std::string w = std::string(br) + ".head.weight", b = std::string(br) + ".head.bias";
    ck.params.set(w, Tensor(ck.params.get(w).shape(), 0.0));
    Tensor bias({4}, 0.0);
    bias[2] = 1.0;
    ck.params.set(b, bias);
  }
  EXPECT_DOUBLE_EQ(evaluate(ck, test_split(), 0.0, 0), 0.25);
}

TEST(Metrics, ExamplesAndSupportWeightedAverage) {
  const auto all = metrics_report({0, 1, 2}, {0, 1, 2}, 3);
  EXPECT_EQ(all.overall, 1.0);
  testutil::Gen gen(6);
  std::vector<int> pred(50), lab(50);
  for (int i = 0; i < 50; ++i) {
    lab[i] = gen.integer(0, 3);  // class 4 never appears
    pred[i] = gen.coin(0.6) ? lab[i] : gen.integer(0, 4);
  }
  const auto m = metrics_report(pred, lab, 5);
  EXPECT_FALSE(m.per_class[4].has_value());
  double weighted = 0.0;
  int total = 0;
  for (int k = 0; k < 5; ++k) {
    if (m.per_class[k]) weighted += *m.per_class[k] * m.support[k];
    total += m.support[k];
  }
  EXPECT_NEAR(weighted / total, m.overall, 1e-12);
  int diag = 0;
  for (int k = 0; k < 5; ++k) diag += m.confusion[k][k];
  EXPECT_NEAR(diag / 50.0, m.overall, 1e-15);
  EXPECT_NE(m.to_csv().find("undefined"), std::string::npos);
  EXPECT_THROW(metrics_report({0}, {0, 1}, 2), InputError);
}

TEST(Ensemble, SkeletonFormulaIdentityAndPermutation) {
  testutil::Gen gen(7);
  std::vector<Tensor> l;
  for (int i = 0; i < 4; ++i) l.push_back(gen.tensor({5, 6}, -10, 10));
  const Tensor out = ensemble_logits(EnsembleSpec::skeleton(), l);
  for (std::size_t i = 0; i < 30; ++i) EXPECT_NEAR(out[i], 2 * (l[0][i] + l[1][i]) + (l[2][i] + l[3][i]), 1e-12);

  EXPECT_EQ(ensemble_logits({{{"J", 1.0, ""}}}, {l[0]}), l[0]);

  auto spec = EnsembleSpec::skeleton();
  std::swap(spec.entries[0], spec.entries[3]);
  std::vector<Tensor> perm{l[3], l[1], l[2], l[0]};
  const Tensor out2 = ensemble_logits(spec, perm);
  for (std::size_t i = 0; i < 30; ++i) EXPECT_NEAR(out2[i], out[i], 1e-12);

  auto rgb = l;
  rgb.push_back(gen.tensor({5, 6}));
  const Tensor five = ensemble_logits(EnsembleSpec::with_rgb(), rgb);
  for (std::size_t i = 0; i < 30; ++i) EXPECT_NEAR(five[i], out[i] + 3 * rgb[4][i], 1e-12);
}

TEST(Ensemble, LinearityAndScaleInvariance) {
  testutil::Gen gen(8);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Tensor> a, b;
    for (int i = 0; i < 4; ++i) {
      a.push_back(gen.tensor({4, 3}));
      b.push_back(gen.tensor({4, 3}));
    }
    const double alpha = gen.uniform(-3, 3);
    auto mixed = a;
    for (std::size_t i = 0; i < 12; ++i) mixed[1][i] = a[1][i] + alpha * b[1][i];
    const auto spec = EnsembleSpec::skeleton();
    auto only_b = std::vector<Tensor>(4, Tensor({4, 3}, 0.0));
    only_b[1] = b[1];
    const Tensor lhs = ensemble_logits(spec, mixed);
    const Tensor ra = ensemble_logits(spec, a), rb = ensemble_logits(spec, only_b);
    for (std::size_t i = 0; i < 12; ++i) EXPECT_NEAR(lhs[i], ra[i] + alpha * rb[i], 1e-12);

    auto scaled = spec;
    const double c = gen.uniform(0.001, 1000);
    for (auto& e : scaled.entries) e.weight *= c;
    EXPECT_EQ(fusion::argmax_rows(ensemble_logits(scaled, a)), fusion::argmax_rows(ra));
  }
}

TEST(Ensemble, MismatchesAndSpecParsing) {
  testutil::Gen gen(9);
  EXPECT_THROW(ensemble_logits(EnsembleSpec::skeleton(), {gen.tensor({2, 2})}), InputError);
  std::vector<Tensor> l(4, gen.tensor({2, 3}));
  l[2] = gen.tensor({2, 4});
  EXPECT_THROW(ensemble_logits(EnsembleSpec::skeleton(), l), InputError);
  const auto spec = parse_ensemble_spec("# skeleton\nJ 2 j.jsonl\nB 2\n\nRGB 3 rgb.jsonl # ingested\n");
  ASSERT_EQ(spec.entries.size(), 3u);
  EXPECT_EQ(spec.entries[2].tag, "RGB");
  EXPECT_EQ(spec.entries[2].weight, 3.0);
  EXPECT_EQ(spec.entries[0].source, "j.jsonl");
  EXPECT_THROW(parse_ensemble_spec("J\n"), ConfigError);
}

TEST(Ensemble, SweepIsFullFactorial) {
  testutil::Gen gen(10);
  std::vector<Tensor> l;
  for (int i = 0; i < 4; ++i) l.push_back(gen.tensor({30, 5}));
  std::vector<int> y(30);
  for (auto& v : y) v = gen.integer(0, 4);
  const auto spec = EnsembleSpec::skeleton();
  const auto rows = weight_perturbation_sweep(spec, l, y, {0.5, 1.0, 1.5});
  ASSERT_EQ(rows.size(), 81u);
  std::set<std::vector<double>> distinct;
  const double baseline = accuracy_of(fusion::argmax_rows(ensemble_logits(spec, l)), y);
  bool saw_unit = false;
  for (const auto& r : rows) {
    distinct.insert(r.scales);
    if (r.scales == std::vector<double>(4, 1.0)) {
      EXPECT_EQ(r.accuracy, baseline);
      saw_unit = true;
    }
    if (r.scales == std::vector<double>(4, 0.5) || r.scales == std::vector<double>(4, 1.5)) {
      EXPECT_EQ(r.accuracy, baseline);
    }
  }
  EXPECT_TRUE(saw_unit);
  EXPECT_EQ(distinct.size(), 81u);
  const auto csv = sweep_csv(spec, rows);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 82);
}
