#include "bharnet/fusion.hpp"

#include <cmath>

#include "bharnet/errors.hpp"
#include "bharnet/ops.hpp"

namespace bharnet::fusion {

namespace {

std::vector<Var> gather(const BranchLogits& l, const std::vector<Branch>& which) {
  std::vector<Var> out;
  for (Branch b : which) {
    if (!l.has(b)) throw ConfigError(std::string("loss needs branch ") + nn::to_string(b) + ", which is absent");
    out.push_back(l.at(b));
  }
  return out;
}

}  // namespace

void LossWeights::validate() const {
  for (double w : {idv, cpl, nor})
    if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("loss weights must be finite and non-negative");
  if (idv == 0.0 && cpl == 0.0 && nor == 0.0) throw ConfigError("at least one loss weight must be positive");
}

std::vector<Branch> individual_branches(Variant v) {
  if (v == Variant::kB) return {Branch::kBE, Branch::kHE};
  return {Branch::kBI, Branch::kHI};
}

std::vector<Branch> complementary_branches(Variant v) {
  switch (v) {
    case Variant::kB:
      return {Branch::kBE, Branch::kHE};
    case Variant::kP:
      return {Branch::kBI, Branch::kHI};
    case Variant::kE:
      return {Branch::kBI, Branch::kHI, Branch::kBE, Branch::kHE};
  }
  return {};
}

std::vector<Branch> noisy_or_branches(Variant v) {
  if (v == Variant::kP) return {Branch::kBI, Branch::kHI};
  return {Branch::kBE, Branch::kHE};
}

Var softmax_cross_entropy(const Var& logits, const std::vector<int>& labels) {
  return nn::softmax_cross_entropy(logits, labels);
}

Var loss_individual(const BranchLogits& l, Variant v, const std::vector<int>& labels) {
  std::vector<std::pair<double, Var>> terms;
  for (const auto& logits : gather(l, individual_branches(v)))
    terms.emplace_back(1.0, nn::softmax_cross_entropy(logits, labels));
  return nn::weighted_sum(terms);
}

Var loss_complementary(const BranchLogits& l, Variant v, const std::vector<int>& labels) {
  return nn::softmax_cross_entropy(nn::mean_of(gather(l, complementary_branches(v))), labels);
}

FusionScores noisy_or(const std::vector<FusionScores>& scores) {
  if (scores.empty()) throw InputError("noisy_or: no score sets");
  std::vector<Var> vars;
  for (const auto& s : scores) {
    if (s.per_class.shape() != scores.front().per_class.shape())
      throw InputError("noisy_or: score sets differ in shape");
    for (double p : s.per_class.values())
      if (!(p >= 0.0 && p <= 1.0)) throw InputError("noisy_or: score outside [0, 1]");
    vars.push_back(Var::constant(s.per_class));
  }
  return {nn::noisy_or(vars).value()};
}

Var loss_noisy_or(const BranchLogits& l, Variant v, const std::vector<int>& labels) {
  std::vector<Var> probs;
  for (const auto& logits : gather(l, noisy_or_branches(v))) probs.push_back(nn::sigmoid(logits));
  return nn::softmax_cross_entropy(nn::noisy_or(probs), labels);
}

LossTerms loss_terms(const BranchLogits& l, Variant v, const std::vector<int>& labels, const LossWeights& w) {
  w.validate();
  LossTerms t;
  t.idv = loss_individual(l, v, labels);
  t.cpl = loss_complementary(l, v, labels);
  t.nor = loss_noisy_or(l, v, labels);
  t.total = nn::weighted_sum({{w.idv, t.idv}, {w.cpl, t.cpl}, {w.nor, t.nor}});
  return t;
}

Var loss_total(const BranchLogits& l, Variant v, const std::vector<int>& labels, const LossWeights& w) {
  return loss_terms(l, v, labels, w).total;
}

std::vector<int> argmax_rows(const nn::Tensor& scores) {
  if (scores.rank() != 2) throw InputError("argmax_rows: expected [batch, K]");
  const std::size_t B = scores.dim(0), K = scores.dim(1);
  std::vector<int> out(B, 0);
  for (std::size_t b = 0; b < B; ++b) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < K; ++k)
      if (scores[b * K + k] > scores[b * K + best]) best = k;
    out[b] = static_cast<int>(best);
  }
  return out;
}

std::vector<int> predict(const BranchLogits& l) {
  if (l.by_branch.empty()) throw InputError("predict: no branches");
  nn::Tensor total(l.by_branch.begin()->second.shape(), 0.0);
  for (const auto& [_, logits] : l.by_branch) {
    if (logits.shape() != total.shape()) throw InputError("predict: branch logits differ in shape");
    for (std::size_t i = 0; i < total.size(); ++i) total[i] += logits.value()[i];
  }
  return argmax_rows(total);
}

}  // namespace bharnet::fusion
