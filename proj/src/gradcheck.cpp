#include "bharnet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "bharnet/fusion.hpp"
#include "bharnet/model.hpp"
#include "bharnet/ops.hpp"
#include "bharnet/rng.hpp"
#include "bharnet/skeleton.hpp"

namespace bharnet::nn {

double GradcheckReport::max_rel_error() const {
  double m = 0.0;
  for (const auto& e : entries) m = std::max(m, e.max_rel_error);
  return m;
}

std::size_t GradcheckReport::kinked() const {
  std::size_t n = 0;
  for (const auto& e : entries) n += e.kinked;
  return n;
}

std::string GradcheckReport::to_text() const {
  std::ostringstream out;
  out.precision(3);
  out << std::scientific;
  out << "# step " << step << "\n# name max_rel_error checked kinked\n";
  std::size_t total = 0;
  for (const auto& e : entries) {
    out << e.name << " " << e.max_rel_error << " " << e.checked << " " << e.kinked << "\n";
    total += e.checked;
  }
  out << "max_rel_error " << max_rel_error() << " " << total << " " << kinked() << "\n";
  return out.str();
}

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / denom;
}

GradcheckEntry check_gradient(const std::string& name, std::vector<Var> inputs, const std::function<Var()>& loss,
                              double step) {
  KinkMonitor monitor;
  set_kink_monitor(&monitor);
  struct Detach {
    ~Detach() { set_kink_monitor(nullptr); }
  } detach;

  for (auto& in : inputs) in.zero_grad();
  backward(loss());
  std::vector<Tensor> analytic;
  for (const auto& in : inputs) analytic.push_back(in.grad());

  GradcheckEntry entry{name, 0.0, 0, 0};
  auto probe = [&]() {
    monitor.compare();
    const double v = loss().value().item();
    return std::make_pair(v, monitor.crossed);
  };
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    Tensor& x = inputs[k].mutable_value();
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double orig = x[i];
      x[i] = orig + step;
      const auto [up, up_kink] = probe();
      x[i] = orig - step;
      const auto [down, down_kink] = probe();
      x[i] = orig;
      if (up_kink || down_kink) {
        ++entry.kinked;
        continue;
      }
      const double numeric = (up - down) / (2.0 * step);
      entry.max_rel_error = std::max(entry.max_rel_error, relative_error(analytic[k][i], numeric));
      ++entry.checked;
    }
  }
  return entry;
}

namespace {

Tensor random_tensor(std::mt19937_64& rng, const Shape& shape, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(shape, 0.0);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = u(rng);
  return t;
}

// Values with |x| in [0.1, 1]: clear of the ReLU kink by much more than a step.
Tensor kink_free(std::mt19937_64& rng, const Shape& shape) {
  Tensor t = random_tensor(rng, shape, 0.1, 1.0);
  std::bernoulli_distribution sign(0.5);
  for (std::size_t i = 0; i < t.size(); ++i)
    if (sign(rng)) t[i] = -t[i];
  return t;
}

// sum(x * r) for a fixed random r, so every output coordinate carries a
// distinct weight in the scalar loss.
Var contract(const Var& x, const Tensor& r) {
  double acc = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) acc += x.value()[i] * r[i];
  return make_result(Tensor::scalar(acc), {x}, [r](detail::Node& self) {
    detail::Node& in = *self.inputs[0];
    if (!in.requires_grad) return;
    const double g = self.grad[0];
    Tensor& gb = in.grad_buffer();
    for (std::size_t i = 0; i < r.size(); ++i) gb[i] += g * r[i];
  });
}

}  // namespace

GradcheckReport run_gradcheck(std::uint64_t seed, double step) {
  std::mt19937_64 rng(derive_seed(seed, fnv1a("gradcheck")));
  GradcheckReport report;
  report.step = step;

  const std::size_t B = 2, C = 3, C2 = 4, T = 5, V = 6, K = 4;
  const Shape feat{B, C, T, V};

  auto probe = [&](const Shape& out) { return random_tensor(rng, out, -1.0, 1.0); };

  {
    Var a = Var::parameter(random_tensor(rng, feat, -1, 1));
    Var b = Var::parameter(random_tensor(rng, feat, -1, 1));
    Tensor r = probe(feat);
    report.entries.push_back(check_gradient("add", {a, b}, [&] { return contract(add(a, b), r); }, step));
    report.entries.push_back(check_gradient("scale", {a}, [&] { return contract(scale(a, -1.7), r); }, step));
    report.entries.push_back(check_gradient("sigmoid", {a}, [&] { return contract(sigmoid(a), r); }, step));
    report.entries.push_back(check_gradient("sum", {a}, [&] { return scale(sum(a), 0.3); }, step));
    report.entries.push_back(check_gradient(
        "weighted_sum", {a, b}, [&] { return contract(weighted_sum({{0.5, a}, {-2.0, b}}), r); }, step));
    report.entries.push_back(check_gradient("mean_of", {a, b}, [&] { return contract(mean_of({a, b}), r); }, step));
    Tensor rp = probe({B, C});
    report.entries.push_back(check_gradient("mean_pool", {a}, [&] { return contract(mean_pool(a), rp); }, step));
  }
  {
    Var a = Var::parameter(kink_free(rng, feat));
    Tensor r = probe(feat);
    report.entries.push_back(check_gradient("relu", {a}, [&] { return contract(relu(a), r); }, step));
  }
  {
    // Path graph with self loops as a small fixed adjacency.
    Tensor adj({V, V}, 0.0);
    for (std::size_t v = 0; v < V; ++v) {
      adj[v * V + v] = 0.5;
      if (v + 1 < V) adj[v * V + v + 1] = adj[(v + 1) * V + v] = 0.25;
    }
    Var x = Var::parameter(random_tensor(rng, feat, -1, 1));
    Var w = Var::parameter(random_tensor(rng, {C, C2}, -1, 1));
    Var k = Var::parameter(random_tensor(rng, {3, C, C2}, -1, 1));
    Tensor r = probe({B, C2, T, V});
    report.entries.push_back(
        check_gradient("graph_conv", {x, w}, [&] { return contract(graph_conv(x, adj, w), r); }, step));
    report.entries.push_back(
        check_gradient("channel_mix", {x, w}, [&] { return contract(channel_mix(x, w), r); }, step));
    report.entries.push_back(
        check_gradient("temporal_conv", {x, k}, [&] { return contract(temporal_conv(x, k), r); }, step));
  }
  {
    Var src = Var::parameter(random_tensor(rng, {B, C, T, V}, -1, 1));
    Var dst = Var::parameter(random_tensor(rng, {B, C, T + 2, V + 1}, -1, 1));
    Var wg = Var::parameter(random_tensor(rng, {C, C}, -1, 1));
    Tensor r = probe(dst.shape());
    report.entries.push_back(check_gradient("cross_attention_gate", {src, dst, wg},
                                            [&] { return contract(cross_attention_gate(src, dst, wg), r); }, step));
  }
  {
    Var x = Var::parameter(random_tensor(rng, {B, C}, -1, 1));
    Var w = Var::parameter(random_tensor(rng, {C, K}, -1, 1));
    Var bias = Var::parameter(random_tensor(rng, {K}, -1, 1));
    Tensor r = probe({B, K});
    report.entries.push_back(
        check_gradient("linear", {x, w, bias}, [&] { return contract(linear(x, w, bias), r); }, step));
  }
  {
    Var p = Var::parameter(random_tensor(rng, {B, K}, 0.05, 0.95));
    Var q = Var::parameter(random_tensor(rng, {B, K}, 0.05, 0.95));
    Var s = Var::parameter(random_tensor(rng, {B, K}, 0.05, 0.95));
    Tensor r = probe({B, K});
    report.entries.push_back(
        check_gradient("noisy_or", {p, q, s}, [&] { return contract(noisy_or({p, q, s}), r); }, step));
    Var logits = Var::parameter(random_tensor(rng, {B, K}, -3, 3));
    report.entries.push_back(check_gradient(
        "softmax_cross_entropy", {logits}, [&] { return softmax_cross_entropy(logits, {1, 3}); }, step));
  }
  {
    const auto body = build_body_topology();
    const auto hand = build_hand_topology();
    ModelSpec spec = ModelSpec::for_variant(Variant::kE, static_cast<int>(K), {4, 6});
    DualStreamNet net(spec, body, hand);
    ParamStore params = net.init_params(derive_seed(seed, 1));
    const std::size_t Tm = 6;
    Var xb = Var::constant(random_tensor(rng, {B, 3, Tm, static_cast<std::size_t>(body.joint_count())}, -1, 1));
    Var xh = Var::constant(random_tensor(rng, {B, 3, Tm, static_cast<std::size_t>(hand.joint_count())}, -1, 1));
    const std::vector<int> labels{0, 2};
    const fusion::LossWeights w{1.0, 1.0, 1.0};
    std::vector<Var> inputs;
    for (const auto& [_, v] : params.entries())
      if (v.requires_grad()) inputs.push_back(v);
    report.entries.push_back(check_gradient(
        "loss_total(E)", inputs,
        [&] { return fusion::loss_total(net.forward(params, xb, xh), Variant::kE, labels, w); }, step));
  }
  return report;
}

}  // namespace bharnet::nn
