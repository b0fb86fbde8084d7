#pragma once

#include <utility>
#include <vector>

#include "bharnet/autograd.hpp"

namespace bharnet::nn {

// Feature maps are laid out [batch, C, T, V]; logits are [batch, K].
// Shape mismatches throw InputError; even temporal kernels throw ConfigError.

/// Thread-local record of which ReLU inputs were positive. Finite-difference
/// checks record the pattern at the base point and then flag any probe that
/// lands on the other side of a kink.
struct KinkMonitor {
  std::vector<char> pattern;
  std::size_t cursor = 0;
  bool recording = true;
  bool crossed = false;

  void compare() {
    recording = false;
    cursor = 0;
    crossed = false;
  }
};
/// nullptr detaches.
void set_kink_monitor(KinkMonitor* monitor);

Var add(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var relu(const Var& a);
Var sigmoid(const Var& a);
/// Sum of all entries, shape [1].
Var sum(const Var& a);
/// Sum of (weight, value) pairs of equal shape.
Var weighted_sum(const std::vector<std::pair<double, Var>>& terms);
/// Element-wise arithmetic mean of equal-shape inputs.
Var mean_of(const std::vector<Var>& xs);

/// y[b,c',t,v] = sum_c W[c,c'] * sum_u x[b,c,t,u] * adj[u,v]. The adjacency is a
/// fixed (non-trainable) operand and is applied sparsely.
Var graph_conv(const Var& x, const Tensor& adj, const Var& weight);

/// Point-wise channel map y[b,c',t,v] = sum_c W[c,c'] x[b,c,t,v].
Var channel_mix(const Var& x, const Var& weight);

/// 1-D convolution along T for every joint; kernel is [k, C, C'], k odd,
/// zero padding (k-1)/2 on both sides.
Var temporal_conv(const Var& x, const Var& kernel);

/// Pooled channel gate: g = sigmoid(W_g * mean_{T,V}(src)) per sample and
/// channel, output = dst * g broadcast over (T, V).
Var cross_attention_gate(const Var& src, const Var& dst, const Var& gate_weight);

/// Global average over (T, V): [b,C,T,V] -> [b,C].
Var mean_pool(const Var& x);

/// x[b,C] * W[C,K] + bias[K].
Var linear(const Var& x, const Var& weight, const Var& bias);

/// Element-wise 1 - prod_i (1 - p_i).
Var noisy_or(const std::vector<Var>& scores);

/// Batch mean of -log softmax(logits)[label], max-subtracted. Shape [1].
Var softmax_cross_entropy(const Var& logits, const std::vector<int>& labels);

}  // namespace bharnet::nn
