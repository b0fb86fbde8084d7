#include "bharnet/ops.hpp"

#include <algorithm>
#include <cmath>

#include "bharnet/errors.hpp"

namespace bharnet::nn {

namespace {

using detail::Node;

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape())
    throw InputError(std::string(op) + ": shape " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
}

void require_rank(const Var& a, std::size_t rank, const char* op) {
  if (a.shape().size() != rank)
    throw InputError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_string(a.shape()));
}

// Accumulate into an input's gradient only when it participates.
template <typename F>
void feed(Node& self, std::size_t i, F&& f) {
  Node& in = *self.inputs[i];
  if (in.requires_grad) f(in.grad_buffer());
}

// Four independent partial sums; the fixed split keeps results reproducible.
double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

double sigmoid_scalar(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

struct Sparse {
  // For every target joint v: (source u, weight adj[u,v]).
  std::vector<std::vector<std::pair<std::size_t, double>>> cols;
};

Sparse sparsify(const Tensor& adj) {
  const std::size_t V = adj.dim(0);
  Sparse s;
  s.cols.resize(V);
  for (std::size_t u = 0; u < V; ++u)
    for (std::size_t v = 0; v < V; ++v)
      if (adj[u * V + v] != 0.0) s.cols[v].emplace_back(u, adj[u * V + v]);
  return s;
}

// z[b,c,t,v] = sum_u x[b,c,t,u] adj[u,v], or its transpose when `transpose`.
void aggregate(const double* x, double* z, std::size_t planes, std::size_t T, std::size_t V, const Sparse& s,
               bool transpose) {
  for (std::size_t p = 0; p < planes; ++p) {
    const double* xp = x + p * T * V;
    double* zp = z + p * T * V;
    for (std::size_t t = 0; t < T; ++t) {
      const double* xr = xp + t * V;
      double* zr = zp + t * V;
      for (std::size_t v = 0; v < V; ++v) {
        if (!transpose) {
          double acc = 0.0;
          for (const auto& [u, a] : s.cols[v]) acc += xr[u] * a;
          zr[v] = acc;
        } else {
          const double g = xr[v];
          for (const auto& [u, a] : s.cols[v]) zr[u] += g * a;
        }
      }
    }
  }
}

// y[b,c2,:] = sum_c W[c,c2] z[b,c,:] over planes of length n.
void mix_forward(const double* z, const double* w, double* y, std::size_t B, std::size_t C, std::size_t C2,
                 std::size_t n) {
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c2 = 0; c2 < C2; ++c2) {
      double* yp = y + (b * C2 + c2) * n;
      for (std::size_t c = 0; c < C; ++c) {
        const double wc = w[c * C2 + c2];
        const double* zp = z + (b * C + c) * n;
        for (std::size_t i = 0; i < n; ++i) yp[i] += wc * zp[i];
      }
    }
}

void mix_backward(const double* z, const double* w, const double* gy, double* gz, double* gw, std::size_t B,
                  std::size_t C, std::size_t C2, std::size_t n) {
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c2 = 0; c2 < C2; ++c2) {
      const double* gp = gy + (b * C2 + c2) * n;
      for (std::size_t c = 0; c < C; ++c) {
        const double* zp = z + (b * C + c) * n;
        if (gw) gw[c * C2 + c2] += dot(zp, gp, n);
        if (gz) {
          const double wc = w[c * C2 + c2];
          double* gzp = gz + (b * C + c) * n;
          for (std::size_t i = 0; i < n; ++i) gzp[i] += wc * gp[i];
        }
      }
    }
}

}  // namespace

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  return make_result(std::move(out), {a, b}, [](Node& self) {
    for (std::size_t k = 0; k < 2; ++k)
      feed(self, k, [&](Tensor& g) {
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
      });
  });
}

Var scale(const Var& a, double s) {
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= s;
  return make_result(std::move(out), {a}, [s](Node& self) {
    feed(self, 0, [&](Tensor& g) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += s * self.grad[i];
    });
  });
}

namespace {
thread_local KinkMonitor* kink_monitor = nullptr;
}

void set_kink_monitor(KinkMonitor* monitor) { kink_monitor = monitor; }

Var relu(const Var& a) {
  Tensor out = a.value();
  if (auto* m = kink_monitor) {
    for (std::size_t i = 0; i < out.size(); ++i) {
      const char on = out[i] > 0.0;
      if (m->recording) m->pattern.push_back(on);
      else if (m->cursor >= m->pattern.size() || m->pattern[m->cursor] != on) m->crossed = true;
      ++m->cursor;
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = out[i] > 0.0 ? out[i] : 0.0;
  return make_result(std::move(out), {a}, [](Node& self) {
    feed(self, 0, [&](Tensor& g) {
      for (std::size_t i = 0; i < g.size(); ++i)
        if (self.value[i] > 0.0) g[i] += self.grad[i];
    });
  });
}

Var sigmoid(const Var& a) {
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = sigmoid_scalar(out[i]);
  return make_result(std::move(out), {a}, [](Node& self) {
    feed(self, 0, [&](Tensor& g) {
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double s = self.value[i];
        g[i] += self.grad[i] * s * (1.0 - s);
      }
    });
  });
}

Var sum(const Var& a) {
  double acc = 0.0;
  for (double x : a.value().values()) acc += x;
  return make_result(Tensor::scalar(acc), {a}, [](Node& self) {
    feed(self, 0, [&](Tensor& g) {
      const double s = self.grad[0];
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += s;
    });
  });
}

Var weighted_sum(const std::vector<std::pair<double, Var>>& terms) {
  if (terms.empty()) throw InputError("weighted_sum: no terms");
  Tensor out(terms.front().second.shape(), 0.0);
  std::vector<Var> inputs;
  std::vector<double> weights;
  for (const auto& [w, v] : terms) {
    require_same_shape(terms.front().second, v, "weighted_sum");
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += w * v.value()[i];
    inputs.push_back(v);
    weights.push_back(w);
  }
  return make_result(std::move(out), std::move(inputs), [weights](Node& self) {
    for (std::size_t k = 0; k < weights.size(); ++k)
      feed(self, k, [&](Tensor& g) {
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += weights[k] * self.grad[i];
      });
  });
}

Var mean_of(const std::vector<Var>& xs) {
  if (xs.empty()) throw InputError("mean_of: no inputs");
  std::vector<std::pair<double, Var>> terms;
  const double w = 1.0 / static_cast<double>(xs.size());
  for (const auto& x : xs) terms.emplace_back(w, x);
  return weighted_sum(terms);
}

Var graph_conv(const Var& x, const Tensor& adj, const Var& weight) {
  require_rank(x, 4, "graph_conv");
  require_rank(weight, 2, "graph_conv weight");
  const std::size_t B = x.shape()[0], C = x.shape()[1], T = x.shape()[2], V = x.shape()[3];
  if (adj.rank() != 2 || adj.dim(0) != V || adj.dim(1) != V)
    throw InputError("graph_conv: adjacency " + shape_string(adj.shape()) + " does not match V=" + std::to_string(V));
  if (weight.shape()[0] != C)
    throw InputError("graph_conv: weight " + shape_string(weight.shape()) + " does not match C=" + std::to_string(C));
  const std::size_t C2 = weight.shape()[1];

  auto sp = std::make_shared<Sparse>(sparsify(adj));
  Tensor z({B, C, T, V}, 0.0);
  aggregate(x.value().data(), z.data(), B * C, T, V, *sp, false);
  Tensor y({B, C2, T, V}, 0.0);
  mix_forward(z.data(), weight.value().data(), y.data(), B, C, C2, T * V);

  return make_result(std::move(y), {x, weight},
                     [z = std::move(z), sp, B, C, C2, T, V](Node& self) {
                       Node& xin = *self.inputs[0];
                       Node& win = *self.inputs[1];
                       Tensor gz;
                       if (xin.requires_grad) gz = Tensor(z.shape(), 0.0);
                       mix_backward(z.data(), win.value.data(), self.grad.data(), xin.requires_grad ? gz.data() : nullptr,
                                    win.requires_grad ? win.grad_buffer().data() : nullptr, B, C, C2, T * V);
                       if (xin.requires_grad) aggregate(gz.data(), xin.grad_buffer().data(), B * C, T, V, *sp, true);
                     });
}

Var channel_mix(const Var& x, const Var& weight) {
  require_rank(x, 4, "channel_mix");
  require_rank(weight, 2, "channel_mix weight");
  const std::size_t B = x.shape()[0], C = x.shape()[1], T = x.shape()[2], V = x.shape()[3];
  if (weight.shape()[0] != C) throw InputError("channel_mix: weight " + shape_string(weight.shape()) + " vs C=" + std::to_string(C));
  const std::size_t C2 = weight.shape()[1];
  Tensor y({B, C2, T, V}, 0.0);
  mix_forward(x.value().data(), weight.value().data(), y.data(), B, C, C2, T * V);
  return make_result(std::move(y), {x, weight}, [B, C, C2, T, V](Node& self) {
    Node& xin = *self.inputs[0];
    Node& win = *self.inputs[1];
    mix_backward(xin.value.data(), win.value.data(), self.grad.data(),
                 xin.requires_grad ? xin.grad_buffer().data() : nullptr,
                 win.requires_grad ? win.grad_buffer().data() : nullptr, B, C, C2, T * V);
  });
}

Var temporal_conv(const Var& x, const Var& kernel) {
  require_rank(x, 4, "temporal_conv");
  require_rank(kernel, 3, "temporal_conv kernel");
  const std::size_t B = x.shape()[0], C = x.shape()[1], T = x.shape()[2], V = x.shape()[3];
  const std::size_t K = kernel.shape()[0];
  if (K % 2 == 0) throw ConfigError("temporal_conv: kernel size must be odd, got " + std::to_string(K));
  if (kernel.shape()[1] != C)
    throw InputError("temporal_conv: kernel " + shape_string(kernel.shape()) + " vs C=" + std::to_string(C));
  const std::size_t C2 = kernel.shape()[2];
  const long pad = static_cast<long>(K - 1) / 2;

  auto for_taps = [=](auto&& body) {
    for (std::size_t j = 0; j < K; ++j) {
      const long s = static_cast<long>(j) - pad;
      const long t0 = std::max<long>(0, -s);
      const long t1 = std::min<long>(static_cast<long>(T), static_cast<long>(T) - s);
      if (t1 <= t0) continue;
      // Output frames [t0, t1) read input frames [t0 + s, t1 + s).
      body(j, static_cast<std::size_t>(t0) * V, static_cast<std::size_t>(t0 + s) * V,
           static_cast<std::size_t>(t1 - t0) * V);
    }
  };

  Tensor y({B, C2, T, V}, 0.0);
  const double* xv = x.value().data();
  const double* kv = kernel.value().data();
  const std::size_t plane = T * V;
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c2 = 0; c2 < C2; ++c2) {
      double* yp = y.data() + (b * C2 + c2) * plane;
      for_taps([&](std::size_t j, std::size_t yo, std::size_t xo, std::size_t n) {
        for (std::size_t c = 0; c < C; ++c) {
          const double w = kv[(j * C + c) * C2 + c2];
          const double* xp = xv + (b * C + c) * plane + xo;
          double* yq = yp + yo;
          for (std::size_t i = 0; i < n; ++i) yq[i] += w * xp[i];
        }
      });
    }

  return make_result(std::move(y), {x, kernel}, [=](Node& self) {
    Node& xin = *self.inputs[0];
    Node& kin = *self.inputs[1];
    const double* xv2 = xin.value.data();
    const double* kv2 = kin.value.data();
    double* gx = xin.requires_grad ? xin.grad_buffer().data() : nullptr;
    double* gk = kin.requires_grad ? kin.grad_buffer().data() : nullptr;
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t c2 = 0; c2 < C2; ++c2) {
        const double* gp = self.grad.data() + (b * C2 + c2) * plane;
        for_taps([&](std::size_t j, std::size_t yo, std::size_t xo, std::size_t n) {
          for (std::size_t c = 0; c < C; ++c) {
            const std::size_t widx = (j * C + c) * C2 + c2;
            const double* xp = xv2 + (b * C + c) * plane + xo;
            const double* gq = gp + yo;
            if (gk) gk[widx] += dot(xp, gq, n);
            if (gx) {
              const double w = kv2[widx];
              double* gxp = gx + (b * C + c) * plane + xo;
              for (std::size_t i = 0; i < n; ++i) gxp[i] += w * gq[i];
            }
          }
        });
      }
  });
}

Var cross_attention_gate(const Var& src, const Var& dst, const Var& gate_weight) {
  require_rank(src, 4, "cross_attention_gate src");
  require_rank(dst, 4, "cross_attention_gate dst");
  require_rank(gate_weight, 2, "cross_attention_gate weight");
  const std::size_t B = dst.shape()[0], C = dst.shape()[1], Td = dst.shape()[2], Vd = dst.shape()[3];
  if (src.shape()[0] != B || src.shape()[1] != C)
    throw InputError("cross_attention_gate: src " + shape_string(src.shape()) + " vs dst " + shape_string(dst.shape()));
  if (gate_weight.shape()[0] != C || gate_weight.shape()[1] != C)
    throw InputError("cross_attention_gate: weight must be [C,C], got " + shape_string(gate_weight.shape()));
  const std::size_t ns = src.shape()[2] * src.shape()[3];
  const std::size_t nd = Td * Vd;

  Tensor pooled({B, C}, 0.0);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c) {
      const double* sp = src.value().data() + (b * C + c) * ns;
      double acc = 0.0;
      for (std::size_t i = 0; i < ns; ++i) acc += sp[i];
      pooled[b * C + c] = acc / static_cast<double>(ns);
    }
  Tensor gate({B, C}, 0.0);
  const double* wg = gate_weight.value().data();
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t r = 0; r < C; ++r) {
      double a = 0.0;
      for (std::size_t c = 0; c < C; ++c) a += wg[r * C + c] * pooled[b * C + c];
      gate[b * C + r] = sigmoid_scalar(a);
    }
  Tensor out = dst.value();
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c) {
      double* op = out.data() + (b * C + c) * nd;
      const double g = gate[b * C + c];
      for (std::size_t i = 0; i < nd; ++i) op[i] *= g;
    }

  return make_result(std::move(out), {src, dst, gate_weight},
                     [pooled = std::move(pooled), gate = std::move(gate), B, C, ns, nd](Node& self) {
                       Node& sin = *self.inputs[0];
                       Node& din = *self.inputs[1];
                       Node& win = *self.inputs[2];
                       // d loss / d pre-activation of the gate.
                       std::vector<double> ga(B * C, 0.0);
                       for (std::size_t b = 0; b < B; ++b)
                         for (std::size_t c = 0; c < C; ++c) {
                           const double* gp = self.grad.data() + (b * C + c) * nd;
                           const double* dp = din.value.data() + (b * C + c) * nd;
                           const double g = gate[b * C + c];
                           double acc = 0.0;
                           for (std::size_t i = 0; i < nd; ++i) acc += gp[i] * dp[i];
                           ga[b * C + c] = acc * g * (1.0 - g);
                           if (din.requires_grad) {
                             double* gd = din.grad_buffer().data() + (b * C + c) * nd;
                             for (std::size_t i = 0; i < nd; ++i) gd[i] += gp[i] * g;
                           }
                         }
                       if (win.requires_grad) {
                         double* gw = win.grad_buffer().data();
                         for (std::size_t b = 0; b < B; ++b)
                           for (std::size_t r = 0; r < C; ++r)
                             for (std::size_t c = 0; c < C; ++c) gw[r * C + c] += ga[b * C + r] * pooled[b * C + c];
                       }
                       if (sin.requires_grad) {
                         const double* wg2 = win.value.data();
                         double* gs = sin.grad_buffer().data();
                         for (std::size_t b = 0; b < B; ++b)
                           for (std::size_t c = 0; c < C; ++c) {
                             double gp = 0.0;
                             for (std::size_t r = 0; r < C; ++r) gp += wg2[r * C + c] * ga[b * C + r];
                             gp /= static_cast<double>(ns);
                             double* q = gs + (b * C + c) * ns;
                             for (std::size_t i = 0; i < ns; ++i) q[i] += gp;
                           }
                       }
                     });
}

Var mean_pool(const Var& x) {
  require_rank(x, 4, "mean_pool");
  const std::size_t B = x.shape()[0], C = x.shape()[1], n = x.shape()[2] * x.shape()[3];
  Tensor out({B, C}, 0.0);
  for (std::size_t bc = 0; bc < B * C; ++bc) {
    const double* p = x.value().data() + bc * n;
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += p[i];
    out[bc] = acc / static_cast<double>(n);
  }
  return make_result(std::move(out), {x}, [B, C, n](Node& self) {
    feed(self, 0, [&](Tensor& g) {
      for (std::size_t bc = 0; bc < B * C; ++bc) {
        const double v = self.grad[bc] / static_cast<double>(n);
        double* p = g.data() + bc * n;
        for (std::size_t i = 0; i < n; ++i) p[i] += v;
      }
    });
  });
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
  require_rank(x, 2, "linear");
  require_rank(weight, 2, "linear weight");
  require_rank(bias, 1, "linear bias");
  const std::size_t B = x.shape()[0], C = x.shape()[1], K = weight.shape()[1];
  if (weight.shape()[0] != C || bias.shape()[0] != K)
    throw InputError("linear: x " + shape_string(x.shape()) + ", weight " + shape_string(weight.shape()) + ", bias " +
                     shape_string(bias.shape()));
  Tensor y({B, K}, 0.0);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t k = 0; k < K; ++k) {
      double acc = bias.value()[k];
      for (std::size_t c = 0; c < C; ++c) acc += x.value()[b * C + c] * weight.value()[c * K + k];
      y[b * K + k] = acc;
    }
  return make_result(std::move(y), {x, weight, bias}, [B, C, K](Node& self) {
    Node& xin = *self.inputs[0];
    Node& win = *self.inputs[1];
    Node& bin = *self.inputs[2];
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t k = 0; k < K; ++k) {
        const double g = self.grad[b * K + k];
        if (bin.requires_grad) bin.grad_buffer()[k] += g;
        for (std::size_t c = 0; c < C; ++c) {
          if (win.requires_grad) win.grad_buffer()[c * K + k] += xin.value[b * C + c] * g;
          if (xin.requires_grad) xin.grad_buffer()[b * C + c] += win.value[c * K + k] * g;
        }
      }
  });
}

Var noisy_or(const std::vector<Var>& scores) {
  if (scores.empty()) throw InputError("noisy_or: no score sets");
  for (const auto& s : scores) require_same_shape(scores.front(), s, "noisy_or");
  const std::size_t n = scores.front().value().size();
  Tensor out(scores.front().shape(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double keep = 1.0;
    for (const auto& s : scores) keep *= 1.0 - s.value()[i];
    out[i] = 1.0 - keep;
  }
  return make_result(std::move(out), scores, [n](Node& self) {
    const std::size_t m = self.inputs.size();
    for (std::size_t k = 0; k < m; ++k)
      feed(self, k, [&](Tensor& g) {
        for (std::size_t i = 0; i < n; ++i) {
          // d/dp_k [1 - prod_j (1 - p_j)] = prod_{j != k} (1 - p_j)
          double others = 1.0;
          for (std::size_t j = 0; j < m; ++j)
            if (j != k) others *= 1.0 - self.inputs[j]->value[i];
          g[i] += self.grad[i] * others;
        }
      });
  });
}

Var softmax_cross_entropy(const Var& logits, const std::vector<int>& labels) {
  require_rank(logits, 2, "softmax_cross_entropy");
  const std::size_t B = logits.shape()[0], K = logits.shape()[1];
  if (labels.size() != B)
    throw InputError("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for batch of " + std::to_string(B));
  for (int l : labels)
    if (l < 0 || static_cast<std::size_t>(l) >= K)
      throw InputError("softmax_cross_entropy: label " + std::to_string(l) + " out of range for K=" + std::to_string(K));

  Tensor probs({B, K}, 0.0);
  double total = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    const double* z = logits.value().data() + b * K;
    const double mx = *std::max_element(z, z + K);
    double denom = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      probs[b * K + k] = std::exp(z[k] - mx);
      denom += probs[b * K + k];
    }
    for (std::size_t k = 0; k < K; ++k) probs[b * K + k] /= denom;
    total += std::log(denom) + mx - z[labels[b]];
  }
  return make_result(Tensor::scalar(total / static_cast<double>(B)), {logits},
                     [probs = std::move(probs), labels, B, K](Node& self) {
                       feed(self, 0, [&](Tensor& g) {
                         const double s = self.grad[0] / static_cast<double>(B);
                         for (std::size_t b = 0; b < B; ++b)
                           for (std::size_t k = 0; k < K; ++k) {
                             const double target = static_cast<std::size_t>(labels[b]) == k ? 1.0 : 0.0;
                             g[b * K + k] += s * (probs[b * K + k] - target);
                           }
                       });
                     });
}

}  // namespace bharnet::nn
