#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "bharnet/autograd.hpp"
#include "bharnet/skeleton.hpp"

namespace bharnet::nn {

/// Named trainable parameters. Ordered by name so that iteration, and
/// therefore every reduction over parameters, is deterministic.
class ParamStore {
 public:
  explicit ParamStore(std::uint64_t seed = 0) : seed_(seed) {}

  /// Glorot-uniform parameter in +-sqrt(6 / (fan_in + fan_out)). The draw
  /// depends only on (seed, name), not on insertion order.
  Var& add_glorot(const std::string& name, const Shape& shape, std::size_t fan_in, std::size_t fan_out);
  Var& add_zeros(const std::string& name, const Shape& shape);
  /// Inserts or replaces. Non-trainable entries are stored as constants and
  /// never build a backward graph.
  Var& set(const std::string& name, Tensor value, bool trainable = true);

  bool contains(const std::string& name) const { return params_.count(name) != 0; }
  /// Throws ConfigError if the parameter is missing.
  const Var& get(const std::string& name) const;
  Var& get(const std::string& name);

  const std::map<std::string, Var>& entries() const { return params_; }
  std::uint64_t seed() const { return seed_; }
  std::size_t scalar_count() const;

  void zero_grad();
  /// Gradients by name; zeros for parameters the last backward never reached.
  std::map<std::string, Tensor> gradients() const;

 private:
  std::uint64_t seed_;
  std::map<std::string, Var> params_;
};

/// Deep copy (fresh leaf nodes with the same values).
ParamStore clone(const ParamStore& params);
/// Deep copy with every entry non-trainable, for inference.
ParamStore frozen(const ParamStore& params);

enum class Variant { kB, kE, kP };
enum class Branch { kBI, kHI, kBE, kHE };

const char* to_string(Variant v);
const char* to_string(Branch b);
Variant parse_variant(const std::string& s);

struct ModelSpec {
  Variant variant = Variant::kE;
  std::vector<int> channels{16, 32};
  int blocks = 2;
  int class_count = 9;
  bool attention_enabled = true;
  int temporal_kernel = 3;

  static ModelSpec for_variant(Variant v, int class_count, std::vector<int> channels = {16, 32});

  /// Throws ConfigError on any inconsistency (blocks vs channels, K < 2,
  /// attention flag vs variant, even kernel).
  void validate() const;
  std::vector<Branch> branches() const;
  /// Widths of the interactive branches (halved for variant P).
  std::vector<int> interactive_channels() const;

  bool operator==(const ModelSpec&) const = default;
};

struct BranchLogits {
  std::map<Branch, Var> by_branch;

  bool has(Branch b) const { return by_branch.count(b) != 0; }
  /// Throws ConfigError when the branch is absent.
  const Var& at(Branch b) const;
};

/// Symmetric normalisation D^-1/2 (A + I) D^-1/2 of the topology's edges.
Tensor normalized_adjacency(const GraphTopology& topo);

/// One spatio-temporal branch: a fixed input scale, then blocks of graph_conv -> temporal_conv -> ReLU,
/// plus a residual path, then global mean pooling and a linear head.
/// Parameters live under `prefix.` in the ParamStore.
struct BranchLayout {
  std::string prefix;
  std::vector<int> widths;
  int in_channels = layout::kChannels;
  int class_count = 0;
  int temporal_kernel = 3;

  void init(ParamStore& params) const;
  /// Frozen per-channel input scale, set from training statistics.
  std::string input_scale_name() const;
  Var embed(const ParamStore& params, const Var& x) const;
  Var block(const ParamStore& params, int i, const Var& x, const Tensor& adj) const;
  Var head(const ParamStore& params, const Var& features) const;
  /// All parameter names owned by this branch (excluding gates), including
  /// the frozen input scale.
  std::vector<std::string> parameter_names() const;
};

/// Expert (BE/HE) and interactive (BI/HI) branches over a body graph and a hand graph.
class DualStreamNet {
 public:
  DualStreamNet(ModelSpec spec, const GraphTopology& body, const GraphTopology& hand);

  const ModelSpec& spec() const { return spec_; }
  const Tensor& body_adjacency() const { return body_adj_; }
  const Tensor& hand_adjacency() const { return hand_adj_; }

  ParamStore init_params(std::uint64_t seed) const;
  /// Throws ConfigError if a required parameter is missing or mis-shaped.
  void check_params(const ParamStore& params) const;

  /// body: [batch, 3, T, V_body], hand: [batch, 3, T, V_hand].
  BranchLogits forward(const ParamStore& params, const Var& body, const Var& hand) const;

  BranchLayout branch_layout(Branch b) const;
  std::string gate_name(Branch b, int block) const;

 private:
  ModelSpec spec_;
  Tensor body_adj_;
  Tensor hand_adj_;
};

/// Single-stream classifier used for stage-one pretraining (prefix "S").
class StreamNet {
 public:
  StreamNet(std::vector<int> widths, int class_count, const GraphTopology& topo, int temporal_kernel = 3);

  const BranchLayout& layout() const { return layout_; }
  ParamStore init_params(std::uint64_t seed) const;
  Var forward(const ParamStore& params, const Var& x) const;

 private:
  BranchLayout layout_;
  Tensor adj_;
};

/// SGD with heavy-ball momentum: v = momentum * v + grad; p -= lr * v.
class SgdMomentum {
 public:
  /// Throws ConfigError unless lr > 0 and 0 <= momentum < 1.
  SgdMomentum(double lr, double momentum);

  /// Throws TrainingError naming the first parameter with a non-finite gradient;
  /// in that case no parameter is modified.
  void step(ParamStore& params);

  double lr() const { return lr_; }

 private:
  double lr_;
  double momentum_;
  std::map<std::string, Tensor> velocity_;
};

}  // namespace bharnet::nn
