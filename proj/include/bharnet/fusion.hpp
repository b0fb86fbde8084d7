#pragma once

#include <vector>

#include "bharnet/model.hpp"

namespace bharnet::fusion {

using nn::Branch;
using nn::BranchLogits;
using nn::Var;
using nn::Variant;

struct LossWeights {
  double idv = 1.0;
  double cpl = 1.0;
  double nor = 1.0;

  /// Throws ConfigError for negative or non-finite weights, or all zero.
  void validate() const;
};

/// Per-class evidence scores in [0, 1], shape [batch, K].
struct FusionScores {
  nn::Tensor per_class;
};

/// Branches entering each loss term for a variant.
std::vector<Branch> individual_branches(Variant v);     // P,E: BI,HI   B: BE,HE
std::vector<Branch> complementary_branches(Variant v);  // P: BI,HI  E: all four  B: BE,HE
std::vector<Branch> noisy_or_branches(Variant v);       // P: BI,HI  E,B: BE,HE

Var softmax_cross_entropy(const Var& logits, const std::vector<int>& labels);

/// Sum of per-branch cross-entropies.
Var loss_individual(const BranchLogits& l, Variant v, const std::vector<int>& labels);
/// Cross-entropy of the arithmetic mean of the designated branch logits.
Var loss_complementary(const BranchLogits& l, Variant v, const std::vector<int>& labels);

/// Element-wise 1 - prod(1 - p_i). Throws InputError on empty input, shape
/// mismatch, or any score outside [0, 1].
FusionScores noisy_or(const std::vector<FusionScores>& scores);

/// sigmoid per branch -> Noisy-OR -> softmax cross-entropy. The pooled
/// evidence is used as logits directly, without renormalisation.
Var loss_noisy_or(const BranchLogits& l, Variant v, const std::vector<int>& labels);

struct LossTerms {
  Var idv;
  Var cpl;
  Var nor;
  Var total;
};

/// All three terms plus their weighted sum.
LossTerms loss_terms(const BranchLogits& l, Variant v, const std::vector<int>& labels, const LossWeights& w);
Var loss_total(const BranchLogits& l, Variant v, const std::vector<int>& labels, const LossWeights& w);

/// Row-wise argmax, ties resolved to the lowest index.
std::vector<int> argmax_rows(const nn::Tensor& scores);

/// Argmax of the unweighted sum of every present branch.
std::vector<int> predict(const BranchLogits& l);

}  // namespace bharnet::fusion
