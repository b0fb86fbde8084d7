#include <gtest/gtest.h>

#include <cmath>

#include "bharnet/errors.hpp"
#include "bharnet/fusion.hpp"
#include "bharnet/ops.hpp"
#include "test_util.hpp"

using namespace bharnet;
using namespace bharnet::fusion;
using nn::Tensor;

namespace {

// Hand-written cross-entropy, batch mean.
double ref_ce(const Tensor& logits, const std::vector<int>& labels) {
  const std::size_t B = logits.dim(0), K = logits.dim(1);
  double total = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    double m = -1e300;
    for (std::size_t k = 0; k < K; ++k) m = std::max(m, logits[b * K + k]);
    double z = 0.0;
    for (std::size_t k = 0; k < K; ++k) z += std::exp(logits[b * K + k] - m);
    total += m + std::log(z) - logits[b * K + static_cast<std::size_t>(labels[b])];
  }
  return total / static_cast<double>(B);
}

BranchLogits random_logits(testutil::Gen& gen, std::size_t B, std::size_t K, double scale = 2.0) {
  BranchLogits l;
  for (Branch b : {Branch::kBI, Branch::kHI, Branch::kBE, Branch::kHE})
    l.by_branch.emplace(b, Var::parameter(gen.tensor({B, K}, -scale, scale)));
  return l;
}

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

FusionScores scores(std::vector<double> v) {
  const std::size_t n = v.size();
  return FusionScores{Tensor({n}, std::move(v))};
}

}  // namespace

TEST(CrossEntropy, Examples) {
  EXPECT_NEAR(fusion::softmax_cross_entropy(Var::constant(Tensor({2, 4}, 0.0)), {1, 3}).value().item(), std::log(4.0), 1e-15);
  EXPECT_NEAR(fusion::softmax_cross_entropy(Var::constant(Tensor({1, 2}, std::vector<double>{1.0, 0.0})), {0}).value().item(),
              -std::log(std::exp(1.0) / (std::exp(1.0) + 1.0)), 1e-15);
}

TEST(CrossEntropy, MatchesReferenceOnRandomLogits) {
  testutil::Gen gen(1);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t B = gen.integer(1, 5), K = gen.integer(2, 9);
    const Tensor x = gen.tensor({B, K}, -30, 30);
    std::vector<int> y(B);
    for (auto& v : y) v = gen.integer(0, static_cast<int>(K) - 1);
    EXPECT_NEAR(fusion::softmax_cross_entropy(Var::constant(x), y).value().item(), ref_ce(x, y), 1e-12);
  }
}

TEST(BranchSets, PerVariant) {
  using V = std::vector<Branch>;
  EXPECT_EQ(individual_branches(Variant::kB), (V{Branch::kBE, Branch::kHE}));
  EXPECT_EQ(individual_branches(Variant::kE), (V{Branch::kBI, Branch::kHI}));
  EXPECT_EQ(complementary_branches(Variant::kE).size(), 4u);
  EXPECT_EQ(complementary_branches(Variant::kP), (V{Branch::kBI, Branch::kHI}));
  EXPECT_EQ(noisy_or_branches(Variant::kE), (V{Branch::kBE, Branch::kHE}));
  EXPECT_EQ(noisy_or_branches(Variant::kB), (V{Branch::kBE, Branch::kHE}));
  EXPECT_EQ(noisy_or_branches(Variant::kP), (V{Branch::kBI, Branch::kHI}));
}

TEST(LossIndividual, Examples) {
  BranchLogits l;
  l.by_branch.emplace(Branch::kBI, Var::constant(Tensor({1, 4}, 0.0)));
  l.by_branch.emplace(Branch::kHI, Var::constant(Tensor({1, 4}, 0.0)));
  EXPECT_NEAR(loss_individual(l, Variant::kE, {2}).value().item(), 2.0 * std::log(4.0), 1e-15);
  BranchLogits sure;
  Tensor t({1, 4}, 0.0);
  t[1] = 1e4;
  sure.by_branch.emplace(Branch::kBI, Var::constant(t));
  sure.by_branch.emplace(Branch::kHI, Var::constant(t));
  EXPECT_LT(loss_individual(sure, Variant::kE, {1}).value().item(), 1e-12);
  EXPECT_THROW(loss_individual(l, Variant::kB, {0}), ConfigError);
}

TEST(LossComplementary, ExamplesAndFourBranchMean) {
  testutil::Gen gen(2);
  const Tensor x = gen.tensor({3, 4});
  Tensor neg = x;
  for (auto& v : neg.values()) v = -v;
  BranchLogits same, opposite;
  same.by_branch.emplace(Branch::kBI, Var::constant(x));
  same.by_branch.emplace(Branch::kHI, Var::constant(x));
  opposite.by_branch.emplace(Branch::kBI, Var::constant(x));
  opposite.by_branch.emplace(Branch::kHI, Var::constant(neg));
  const std::vector<int> y{0, 1, 3};
  EXPECT_NEAR(loss_complementary(same, Variant::kP, y).value().item(), ref_ce(x, y), 1e-12);
  EXPECT_NEAR(loss_complementary(opposite, Variant::kP, y).value().item(), std::log(4.0), 1e-12);

  const auto l = random_logits(gen, 3, 4);
  Tensor mean({3, 4}, 0.0);
  for (const auto& [b, v] : l.by_branch)
    for (std::size_t i = 0; i < 12; ++i) mean[i] += v.value()[i] / 4.0;
  EXPECT_NEAR(loss_complementary(l, Variant::kE, y).value().item(), ref_ce(mean, y), 1e-12);
}

TEST(NoisyOr, HandCasesAndErrors) {
  EXPECT_NEAR(noisy_or({scores({0.6}), scores({0.5})}).per_class[0], 0.8, 1e-15);
  EXPECT_EQ(noisy_or({scores({0.37}), scores({0.0})}).per_class[0], 0.37);
  EXPECT_EQ(noisy_or({scores({0.37}), scores({1.0})}).per_class[0], 1.0);
  EXPECT_THROW(noisy_or({}), InputError);
  EXPECT_THROW(noisy_or({scores({1.2})}), InputError);
  EXPECT_THROW(noisy_or({scores({0.1, 0.2}), scores({0.3})}), InputError);
}

TEST(NoisyOr, AlgebraicProperties) {
  testutil::Gen gen(3);
  for (int trial = 0; trial < 2000; ++trial) {
    const double p = gen.uniform(0, 1), q = gen.uniform(0, 1), r = gen.uniform(0, 1);
    auto f = [](std::vector<double> xs) {
      std::vector<FusionScores> s;
      for (double x : xs) s.push_back(scores({x}));
      return noisy_or(s).per_class[0];
    };
    const double pq = f({p, q});
    EXPECT_GE(pq, 0.0);
    EXPECT_LE(pq, 1.0);
    EXPECT_GE(pq, std::max(p, q) - 1e-12);
    EXPECT_NEAR(pq, f({q, p}), 1e-12);
    EXPECT_NEAR(f({pq, r}), f({p, f({q, r})}), 1e-12);
    EXPECT_NEAR(f({p, q, r}), f({pq, r}), 1e-12);
    const double q2 = std::min(1.0, q + gen.uniform(0, 0.5));
    EXPECT_GE(f({p, q2}), pq - 1e-12);
    const int n = gen.integer(1, 8);
    EXPECT_NEAR(f(std::vector<double>(static_cast<std::size_t>(n), p)), 1.0 - std::pow(1.0 - p, n), 1e-12);
  }
}

TEST(LossNoisyOr, UniformEvidenceGivesLnK) {
  BranchLogits l;
  l.by_branch.emplace(Branch::kBE, Var::constant(Tensor({2, 5}, 0.0)));
  l.by_branch.emplace(Branch::kHE, Var::constant(Tensor({2, 5}, 0.0)));
  EXPECT_NEAR(loss_noisy_or(l, Variant::kE, {0, 4}).value().item(), std::log(5.0), 1e-15);
  EXPECT_THROW(loss_noisy_or(l, Variant::kP, {0, 4}), ConfigError);
}

TEST(LossNoisyOr, MatchesHandComposition) {
  testutil::Gen gen(4);
  for (int trial = 0; trial < 50; ++trial) {
    const auto l = random_logits(gen, 3, 6, 5.0);
    const std::vector<int> y{gen.integer(0, 5), gen.integer(0, 5), gen.integer(0, 5)};
    for (Variant v : {Variant::kB, Variant::kE, Variant::kP}) {
      const auto set = noisy_or_branches(v);
      Tensor pooled({3, 6}, 0.0);
      for (std::size_t i = 0; i < 18; ++i) {
        double keep = 1.0;
        for (Branch b : set) keep *= 1.0 - sig(l.at(b).value()[i]);
        pooled[i] = 1.0 - keep;
      }
      EXPECT_NEAR(loss_noisy_or(l, v, y).value().item(), ref_ce(pooled, y), 1e-12);
    }
  }
}

TEST(LossNoisyOr, ConfidentBranchDominatesSilentOne) {
  // A silent branch (sigmoid -> 0) is the identity element of the pooling.
  Tensor sure({1, 4}, -1e3), silent({1, 4}, -1e3);
  sure[2] = 5.0;
  BranchLogits l, single;
  l.by_branch.emplace(Branch::kBE, Var::constant(sure));
  l.by_branch.emplace(Branch::kHE, Var::constant(silent));
  Tensor pooled({1, 4}, 0.0);
  pooled[2] = sig(5.0);
  EXPECT_NEAR(loss_noisy_or(l, Variant::kE, {2}).value().item(), ref_ce(pooled, {2}), 1e-12);
}

TEST(LossNoisyOr, GradientOnlyReachesDesignatedBranches) {
  testutil::Gen gen(5);
  const auto l = random_logits(gen, 2, 4);
  nn::backward(loss_noisy_or(l, Variant::kE, {1, 2}));
  for (Branch b : {Branch::kBI, Branch::kHI}) {
    const Tensor g = l.at(b).grad();
    for (double x : g.values()) EXPECT_EQ(x, 0.0);
  }
  double mag = 0.0;
  const Tensor g = l.at(Branch::kBE).grad();
  for (double x : g.values()) mag += std::abs(x);
  EXPECT_GT(mag, 0.0);
}

TEST(LossTotal, WeightSelectionAndSum) {
  testutil::Gen gen(6);
  for (int trial = 0; trial < 20; ++trial) {
    const auto l = random_logits(gen, 4, 5);
    const std::vector<int> y{0, 1, 2, 4};
    for (Variant v : {Variant::kB, Variant::kE, Variant::kP}) {
      BranchLogits sub;
      for (Branch b : nn::ModelSpec::for_variant(v, 5).branches()) sub.by_branch.emplace(b, l.at(b));
      const double idv = loss_individual(sub, v, y).value().item();
      const double cpl = loss_complementary(sub, v, y).value().item();
      const double nor = loss_noisy_or(sub, v, y).value().item();
      EXPECT_NEAR(loss_total(sub, v, y, {1, 0, 0}).value().item(), idv, 1e-12);
      EXPECT_NEAR(loss_total(sub, v, y, {0, 0, 1}).value().item(), nor, 1e-12);
      EXPECT_NEAR(loss_total(sub, v, y, {1, 1, 1}).value().item(), idv + cpl + nor, 1e-12);
      EXPECT_NEAR(loss_total(sub, v, y, {0.5, 2, 0.25}).value().item(), 0.5 * idv + 2 * cpl + 0.25 * nor, 1e-12);
    }
  }
}

TEST(LossTotal, WeightValidation) {
  EXPECT_THROW((LossWeights{0, 0, 0}.validate()), ConfigError);
  EXPECT_THROW((LossWeights{-1, 1, 1}.validate()), ConfigError);
  EXPECT_THROW((LossWeights{1, NAN, 1}.validate()), ConfigError);
  EXPECT_NO_THROW((LossWeights{0, 0, 1}.validate()));
}

TEST(Predict, ArgmaxOfBranchSum) {
  BranchLogits one;
  one.by_branch.emplace(Branch::kBE, Var::constant(Tensor({1, 3}, std::vector<double>{0.1, 0.9, 0.3})));
  EXPECT_EQ(predict(one), std::vector<int>{1});
  BranchLogits two;
  two.by_branch.emplace(Branch::kBE, Var::constant(Tensor({1, 4}, std::vector<double>{3, 0, 1, 0})));
  two.by_branch.emplace(Branch::kHE, Var::constant(Tensor({1, 4}, std::vector<double>{-2, 0, 1.5, 0})));
  EXPECT_EQ(predict(two), std::vector<int>{2});
  EXPECT_EQ(argmax_rows(Tensor({2, 3}, std::vector<double>{1, 1, 0, 0, 2, 2})), (std::vector<int>{0, 1}));
}

TEST(Predict, InvariantToPositiveScalingAndBranchOrder) {
  testutil::Gen gen(7);
  for (int trial = 0; trial < 50; ++trial) {
    const auto l = random_logits(gen, 6, 5);
    BranchLogits scaled;
    const double c = gen.uniform(0.01, 100);
    for (const auto& [b, v] : l.by_branch) scaled.by_branch.emplace(b, nn::scale(v, c));
    EXPECT_EQ(predict(l), predict(scaled));
  }
}
