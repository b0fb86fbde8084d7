#include "bharnet/model.hpp"

#include <cmath>
#include <random>

#include "bharnet/errors.hpp"
#include "bharnet/ops.hpp"
#include "bharnet/rng.hpp"

namespace bharnet::nn {

// ---------------------------------------------------------------- ParamStore

Var& ParamStore::add_glorot(const std::string& name, const Shape& shape, std::size_t fan_in, std::size_t fan_out) {
  std::mt19937_64 rng(derive_seed(seed_, fnv1a(name)));
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t(shape, 0.0);
  for (auto& x : t.values()) x = dist(rng);
  return set(name, std::move(t));
}

Var& ParamStore::add_zeros(const std::string& name, const Shape& shape) { return set(name, Tensor(shape, 0.0)); }

Var& ParamStore::set(const std::string& name, Tensor value, bool trainable) {
  auto [it, inserted] = params_.insert_or_assign(
      name, trainable ? Var::parameter(std::move(value)) : Var::constant(std::move(value)));
  (void)inserted;
  return it->second;
}

const Var& ParamStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ConfigError("missing parameter '" + name + "'");
  return it->second;
}

Var& ParamStore::get(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw ConfigError("missing parameter '" + name + "'");
  return it->second;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [_, v] : params_) n += v.value().size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& [_, v] : params_) v.zero_grad();
}

std::map<std::string, Tensor> ParamStore::gradients() const {
  std::map<std::string, Tensor> out;
  for (const auto& [name, v] : params_) out.emplace(name, v.grad());
  return out;
}

ParamStore clone(const ParamStore& params) {
  ParamStore out(params.seed());
  for (const auto& [name, v] : params.entries()) out.set(name, v.value(), v.requires_grad());
  return out;
}

ParamStore frozen(const ParamStore& params) {
  ParamStore out(params.seed());
  for (const auto& [name, v] : params.entries()) out.set(name, v.value(), false);
  return out;
}

// ---------------------------------------------------------------- ModelSpec

const char* to_string(Variant v) {
  switch (v) {
    case Variant::kB:
      return "B";
    case Variant::kE:
      return "E";
    case Variant::kP:
      return "P";
  }
  return "?";
}

const char* to_string(Branch b) {
  switch (b) {
    case Branch::kBI:
      return "BI";
    case Branch::kHI:
      return "HI";
    case Branch::kBE:
      return "BE";
    case Branch::kHE:
      return "HE";
  }
  return "?";
}

Variant parse_variant(const std::string& s) {
  if (s == "B") return Variant::kB;
  if (s == "E") return Variant::kE;
  if (s == "P") return Variant::kP;
  throw ConfigError("unknown variant '" + s + "' (B|E|P)");
}

ModelSpec ModelSpec::for_variant(Variant v, int class_count, std::vector<int> channels) {
  ModelSpec spec;
  spec.variant = v;
  spec.blocks = static_cast<int>(channels.size());
  spec.channels = std::move(channels);
  spec.class_count = class_count;
  spec.attention_enabled = v != Variant::kB;
  return spec;
}

void ModelSpec::validate() const {
  if (blocks < 1) throw ConfigError("model needs at least one block");
  if (static_cast<int>(channels.size()) != blocks)
    throw ConfigError("channels list has " + std::to_string(channels.size()) + " entries for " + std::to_string(blocks) +
                      " blocks");
  for (int c : channels)
    if (c < 1) throw ConfigError("channel widths must be positive");
  if (class_count < 2) throw ConfigError("class_count must be >= 2");
  if (temporal_kernel < 1 || temporal_kernel % 2 == 0) throw ConfigError("temporal kernel size must be odd");
  if (attention_enabled != (variant != Variant::kB))
    throw ConfigError(std::string("attention_enabled inconsistent with variant ") + to_string(variant));
}

std::vector<Branch> ModelSpec::branches() const {
  switch (variant) {
    case Variant::kB:
      return {Branch::kBE, Branch::kHE};
    case Variant::kP:
      return {Branch::kBI, Branch::kHI};
    case Variant::kE:
      return {Branch::kBI, Branch::kHI, Branch::kBE, Branch::kHE};
  }
  return {};
}

std::vector<int> ModelSpec::interactive_channels() const {
  if (variant != Variant::kP) return channels;
  std::vector<int> half;
  for (int c : channels) half.push_back(std::max(1, c / 2));
  return half;
}

const Var& BranchLogits::at(Branch b) const {
  auto it = by_branch.find(b);
  if (it == by_branch.end()) throw ConfigError(std::string("branch ") + to_string(b) + " not present");
  return it->second;
}

// ---------------------------------------------------------------- graph

Tensor normalized_adjacency(const GraphTopology& topo) {
  const auto V = static_cast<std::size_t>(topo.joint_count());
  Tensor a({V, V}, 0.0);
  for (std::size_t v = 0; v < V; ++v) a[v * V + v] = 1.0;
  for (const auto& [p, c] : topo.edges()) {
    a[static_cast<std::size_t>(p) * V + c] = 1.0;
    a[static_cast<std::size_t>(c) * V + p] = 1.0;
  }
  std::vector<double> inv_sqrt(V);
  for (std::size_t u = 0; u < V; ++u) {
    double d = 0.0;
    for (std::size_t v = 0; v < V; ++v) d += a[u * V + v];
    inv_sqrt[u] = 1.0 / std::sqrt(d);
  }
  for (std::size_t u = 0; u < V; ++u)
    for (std::size_t v = 0; v < V; ++v) a[u * V + v] *= inv_sqrt[u] * inv_sqrt[v];
  return a;
}

// ---------------------------------------------------------------- branches

namespace {
std::string block_name(const std::string& prefix, int i, const char* part) {
  return prefix + ".block" + std::to_string(i) + "." + part;
}
}  // namespace

void BranchLayout::init(ParamStore& params) const {
  const auto k = static_cast<std::size_t>(temporal_kernel);
  auto cin = static_cast<std::size_t>(in_channels);
  params.set(input_scale_name(), Tensor({cin}, 1.0), false);
  for (std::size_t i = 0; i < widths.size(); ++i) {
    const auto w = static_cast<std::size_t>(widths[i]);
    const int bi = static_cast<int>(i);
    params.add_glorot(block_name(prefix, bi, "graph"), {cin, w}, cin, w);
    params.add_glorot(block_name(prefix, bi, "temporal"), {k, w, w}, k * w, k * w);
    if (cin != w) params.add_glorot(block_name(prefix, bi, "residual"), {cin, w}, cin, w);
    cin = w;
  }
  const auto K = static_cast<std::size_t>(class_count);
  params.add_glorot(prefix + ".head.weight", {cin, K}, cin, K);
  params.add_zeros(prefix + ".head.bias", {K});
}

std::string BranchLayout::input_scale_name() const { return prefix + ".input_scale"; }

Var BranchLayout::embed(const ParamStore& params, const Var& x) const {
  const Tensor& s = params.get(input_scale_name()).value();
  const std::size_t C = s.size();
  Tensor diag({C, C}, 0.0);
  for (std::size_t c = 0; c < C; ++c) diag[c * C + c] = s[c];
  return channel_mix(x, Var::constant(std::move(diag)));
}

Var BranchLayout::block(const ParamStore& params, int i, const Var& x, const Tensor& adj) const {
  const Var h = relu(temporal_conv(graph_conv(x, adj, params.get(block_name(prefix, i, "graph"))),
                                   params.get(block_name(prefix, i, "temporal"))));
  const int cin = i == 0 ? in_channels : widths[static_cast<std::size_t>(i) - 1];
  const Var res = cin == widths[static_cast<std::size_t>(i)]
                      ? x
                      : channel_mix(x, params.get(block_name(prefix, i, "residual")));
  return add(h, res);
}

Var BranchLayout::head(const ParamStore& params, const Var& features) const {
  return linear(mean_pool(features), params.get(prefix + ".head.weight"), params.get(prefix + ".head.bias"));
}

std::vector<std::string> BranchLayout::parameter_names() const {
  std::vector<std::string> names{input_scale_name()};
  int cin = in_channels;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    const int bi = static_cast<int>(i);
    names.push_back(block_name(prefix, bi, "graph"));
    names.push_back(block_name(prefix, bi, "temporal"));
    if (cin != widths[i]) names.push_back(block_name(prefix, bi, "residual"));
    cin = widths[i];
  }
  names.push_back(prefix + ".head.weight");
  names.push_back(prefix + ".head.bias");
  return names;
}

// ---------------------------------------------------------------- DualStreamNet

DualStreamNet::DualStreamNet(ModelSpec spec, const GraphTopology& body, const GraphTopology& hand)
    : spec_(std::move(spec)), body_adj_(normalized_adjacency(body)), hand_adj_(normalized_adjacency(hand)) {
  spec_.validate();
}

BranchLayout DualStreamNet::branch_layout(Branch b) const {
  const bool interactive = b == Branch::kBI || b == Branch::kHI;
  return {to_string(b), interactive ? spec_.interactive_channels() : spec_.channels, layout::kChannels,
          spec_.class_count, spec_.temporal_kernel};
}

std::string DualStreamNet::gate_name(Branch b, int block) const { return block_name(to_string(b), block, "gate"); }

ParamStore DualStreamNet::init_params(std::uint64_t seed) const {
  ParamStore params(seed);
  for (Branch b : spec_.branches()) {
    branch_layout(b).init(params);
    if (spec_.attention_enabled && (b == Branch::kBI || b == Branch::kHI)) {
      const auto widths = spec_.interactive_channels();
      for (int i = 0; i < spec_.blocks; ++i) {
        const auto w = static_cast<std::size_t>(widths[static_cast<std::size_t>(i)]);
        params.add_glorot(gate_name(b, i), {w, w}, w, w);
      }
    }
  }
  return params;
}

void DualStreamNet::check_params(const ParamStore& params) const {
  const ParamStore reference = init_params(0);
  for (const auto& [name, v] : reference.entries()) {
    if (!params.contains(name)) throw ConfigError("checkpoint lacks parameter '" + name + "'");
    if (params.get(name).shape() != v.shape())
      throw ConfigError("parameter '" + name + "' has shape " + shape_string(params.get(name).shape()) +
                        ", model expects " + shape_string(v.shape()));
  }
}

BranchLogits DualStreamNet::forward(const ParamStore& params, const Var& body, const Var& hand) const {
  if (body.shape().size() != 4 || hand.shape().size() != 4)
    throw InputError("forward: inputs must be [batch, C, T, V]");
  if (body.shape()[0] != hand.shape()[0] || body.shape()[2] != hand.shape()[2])
    throw InputError("forward: body " + shape_string(body.shape()) + " and hand " + shape_string(hand.shape()) +
                     " disagree on batch or T");

  BranchLogits out;
  const bool experts = spec_.variant != Variant::kP;
  const bool interactive = spec_.variant != Variant::kB;

  if (experts) {
    const auto be = branch_layout(Branch::kBE);
    const auto he = branch_layout(Branch::kHE);
    Var hb = be.embed(params, body), hh = he.embed(params, hand);
    for (int i = 0; i < spec_.blocks; ++i) {
      hb = be.block(params, i, hb, body_adj_);
      hh = he.block(params, i, hh, hand_adj_);
    }
    out.by_branch.emplace(Branch::kBE, be.head(params, hb));
    out.by_branch.emplace(Branch::kHE, he.head(params, hh));
  }
  if (interactive) {
    const auto bi = branch_layout(Branch::kBI);
    const auto hi = branch_layout(Branch::kHI);
    Var hb = bi.embed(params, body), hh = hi.embed(params, hand);
    for (int i = 0; i < spec_.blocks; ++i) {
      const Var nb = bi.block(params, i, hb, body_adj_);
      const Var nh = hi.block(params, i, hh, hand_adj_);
      if (spec_.attention_enabled) {
        hb = cross_attention_gate(nh, nb, params.get(gate_name(Branch::kBI, i)));
        hh = cross_attention_gate(nb, nh, params.get(gate_name(Branch::kHI, i)));
      } else {
        hb = nb;
        hh = nh;
      }
    }
    out.by_branch.emplace(Branch::kBI, bi.head(params, hb));
    out.by_branch.emplace(Branch::kHI, hi.head(params, hh));
  }
  return out;
}

// ---------------------------------------------------------------- StreamNet

StreamNet::StreamNet(std::vector<int> widths, int class_count, const GraphTopology& topo, int temporal_kernel)
    : layout_{"S", std::move(widths), layout::kChannels, class_count, temporal_kernel},
      adj_(normalized_adjacency(topo)) {
  if (layout_.widths.empty()) throw ConfigError("stream network needs at least one block");
  if (class_count < 2) throw ConfigError("class_count must be >= 2");
  if (temporal_kernel < 1 || temporal_kernel % 2 == 0) throw ConfigError("temporal kernel size must be odd");
}

ParamStore StreamNet::init_params(std::uint64_t seed) const {
  ParamStore params(seed);
  layout_.init(params);
  return params;
}

Var StreamNet::forward(const ParamStore& params, const Var& x) const {
  Var h = layout_.embed(params, x);
  for (int i = 0; i < static_cast<int>(layout_.widths.size()); ++i) h = layout_.block(params, i, h, adj_);
  return layout_.head(params, h);
}

// ---------------------------------------------------------------- SGD

SgdMomentum::SgdMomentum(double lr, double momentum) : lr_(lr), momentum_(momentum) {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("learning rate must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
}

void SgdMomentum::step(ParamStore& params) {
  for (const auto& [name, v] : params.entries())
    if (v.has_grad() && !v.grad().all_finite()) throw TrainingError("non-finite gradient in parameter '" + name + "'");

  for (const auto& [name, v] : params.entries()) {
    if (!v.requires_grad()) continue;
    Var p = v;
    const Tensor g = p.grad();
    auto [it, fresh] = velocity_.try_emplace(name, Tensor(g.shape(), 0.0));
    (void)fresh;
    Tensor& vel = it->second;
    Tensor& value = p.mutable_value();
    for (std::size_t i = 0; i < value.size(); ++i) {
      vel[i] = momentum_ * vel[i] + g[i];
      value[i] -= lr_ * vel[i];
    }
  }
}

}  // namespace bharnet::nn
