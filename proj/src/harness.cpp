#include "bharnet/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "bharnet/errors.hpp"
#include "bharnet/ops.hpp"
#include "bharnet/rng.hpp"

namespace bharnet::harness {

using nn::Tensor;
using nn::Var;

namespace {

std::string fmt(double x) {
  std::ostringstream os;
  os << std::setprecision(10) << x;
  return os.str();
}

const GraphTopology& body_topo() {
  static const GraphTopology t = build_body_topology();
  return t;
}

const GraphTopology& hand_topo() {
  static const GraphTopology t = build_two_hand_topology();
  return t;
}

// Stacks per-sample modality tensors of one stream into [n, 3, T, V].
Tensor stack(const std::vector<const modality::ModalityTensor*>& items) {
  const auto& f = *items.front();
  const std::size_t per = f.data.size();
  Tensor out({items.size(), static_cast<std::size_t>(f.channels), static_cast<std::size_t>(f.frames),
              static_cast<std::size_t>(f.joints)},
             0.0);
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i]->data.size() != per) throw InputError("batch members differ in shape");
    std::copy(items[i]->data.begin(), items[i]->data.end(), out.data() + i * per);
  }
  return out;
}

struct StreamInputs {
  std::vector<modality::ModalityTensor> body;
  std::vector<modality::ModalityTensor> hand;
  std::vector<int> labels;
};

StreamInputs clean_inputs(const PreparedSplit& split) {
  StreamInputs in;
  for (const auto& s : split.samples) {
    in.body.push_back(modality::derive(s.body, body_topo(), split.modality));
    in.hand.push_back(modality::derive(s.hand, hand_topo(), split.modality));
    in.labels.push_back(s.label);
  }
  return in;
}

Tensor batch_of(const std::vector<modality::ModalityTensor>& all, const std::vector<std::size_t>& idx) {
  std::vector<const modality::ModalityTensor*> items;
  for (auto i : idx) items.push_back(&all[i]);
  return stack(items);
}

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, int batch_size, std::uint64_t seed, int epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(derive_seed(seed, 1000 + static_cast<std::uint64_t>(epoch)));
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < n; i += static_cast<std::size_t>(batch_size))
    batches.emplace_back(order.begin() + static_cast<long>(i),
                         order.begin() + static_cast<long>(std::min(n, i + static_cast<std::size_t>(batch_size))));
  return batches;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// 1 / RMS per channel over every sample, frame and joint of the training inputs.
Tensor input_scale(const std::vector<modality::ModalityTensor>& xs) {
  const auto C = static_cast<std::size_t>(xs.front().channels);
  std::vector<double> sq(C, 0.0);
  std::vector<std::size_t> count(C, 0);
  for (const auto& m : xs) {
    const std::size_t plane = m.data.size() / C;
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t i = 0; i < plane; ++i) sq[c] += m.data[c * plane + i] * m.data[c * plane + i];
    for (std::size_t c = 0; c < C; ++c) count[c] += plane;
  }
  Tensor s({C}, 1.0);
  for (std::size_t c = 0; c < C; ++c) {
    const double rms = std::sqrt(sq[c] / static_cast<double>(count[c]));
    if (rms > 1e-12) s[c] = 1.0 / rms;
  }
  return s;
}

void require_finite(double loss, int epoch) {
  if (!std::isfinite(loss)) throw TrainingError("non-finite loss at epoch " + std::to_string(epoch));
}

}  // namespace

const char* to_string(Stream s) { return s == Stream::kBody ? "body" : "hand"; }

Stream parse_stream(const std::string& s) {
  if (s == "body") return Stream::kBody;
  if (s == "hand") return Stream::kHand;
  throw ConfigError("unknown stream '" + s + "' (body|hand)");
}

DropScope parse_drop_scope(const std::string& s) {
  if (s == "all") return DropScope::kAll;
  if (s == "hand") return DropScope::kHand;
  throw ConfigError("unknown drop scope '" + s + "' (all|hand)");
}

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("lr must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (channels.empty()) throw ConfigError("channels must list at least one width");
}

PreparedSplit prepare(const DatasetSplit& split, const StreamPreprocess& cfg) {
  check_split(split);
  PreparedSplit out;
  out.class_count = split.class_count;
  out.modality = cfg.modality;
  out.raw = split.sequences;
  out.preprocess = cfg;
  for (const auto& seq : split.sequences) {
    Sample s;
    s.id = seq.id;
    s.label = seq.label;
    s.body = preprocess::run_pipeline(body_stream(seq), cfg.body, body_topo());
    s.hand = preprocess::run_pipeline(hand_stream(seq), cfg.hand, hand_topo());
    out.samples.push_back(std::move(s));
  }
  return out;
}

std::string TrainReport::losses_csv() const {
  std::ostringstream os;
  os << "epoch,L_idv,L_cpl,L_nor,L_total\n";
  for (const auto& e : epochs)
    os << e.epoch << ',' << fmt(e.idv) << ',' << fmt(e.cpl) << ',' << fmt(e.nor) << ',' << fmt(e.total) << '\n';
  return os.str();
}

// ---------------------------------------------------------------- training

TrainResult pretrain_stream(const PreparedSplit& split, Stream stream, const TrainConfig& cfg) {
  cfg.validate();
  if (split.samples.empty()) throw InputError("pretrain_stream: empty split");
  const auto t0 = std::chrono::steady_clock::now();

  const auto& topo = stream == Stream::kBody ? body_topo() : hand_topo();
  nn::StreamNet net(cfg.channels, split.class_count, topo, cfg.temporal_kernel);
  nn::ParamStore params = net.init_params(cfg.seed);
  nn::SgdMomentum opt(cfg.lr, cfg.momentum);
  const auto inputs = clean_inputs(split);
  const auto& xs = stream == Stream::kBody ? inputs.body : inputs.hand;
  params.set(net.layout().input_scale_name(), input_scale(xs), false);

  TrainReport report;
  report.seed = cfg.seed;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    double acc = 0.0;
    for (const auto& idx : epoch_batches(xs.size(), cfg.batch_size, cfg.seed, epoch)) {
      std::vector<int> labels;
      for (auto i : idx) labels.push_back(inputs.labels[i]);
      const Var loss = nn::softmax_cross_entropy(net.forward(params, Var::constant(batch_of(xs, idx))), labels);
      require_finite(loss.value().item(), epoch);
      nn::backward(loss);
      opt.step(params);
      params.zero_grad();
      acc += loss.value().item() * static_cast<double>(idx.size());
    }
    const double mean = acc / static_cast<double>(xs.size());
    report.epochs.push_back({epoch, mean, 0.0, 0.0, mean});
  }

  TrainResult result;
  result.checkpoint.spec = nn::ModelSpec::for_variant(nn::Variant::kB, split.class_count, cfg.channels);
  result.checkpoint.spec.temporal_kernel = cfg.temporal_kernel;
  result.checkpoint.stream = to_string(stream);
  result.checkpoint.modality = modality::to_string(split.modality);
  result.checkpoint.seed = cfg.seed;
  result.checkpoint.params = std::move(params);
  report.train_accuracy = evaluate(result.checkpoint, split, 0.0, cfg.seed);
  report.wall_seconds = seconds_since(t0);
  result.report = std::move(report);
  return result;
}

std::vector<int> pretrain_widths(nn::Variant variant, const std::vector<int>& channels) {
  return nn::ModelSpec::for_variant(variant, 2, channels).interactive_channels();
}

void load_pretrained(nn::ParamStore& params, const nn::DualStreamNet& net, const nn::Checkpoint& body_ckpt,
                     const nn::Checkpoint& hand_ckpt) {
  if (body_ckpt.stream != "body") throw ConfigError("body checkpoint has stream '" + body_ckpt.stream + "'");
  if (hand_ckpt.stream != "hand") throw ConfigError("hand checkpoint has stream '" + hand_ckpt.stream + "'");
  for (nn::Branch b : net.spec().branches()) {
    const bool body = b == nn::Branch::kBI || b == nn::Branch::kBE;
    const auto& src = body ? body_ckpt : hand_ckpt;
    const auto layout = net.branch_layout(b);
    for (const auto& name : layout.parameter_names()) {
      const std::string from = "S" + name.substr(layout.prefix.size());
      if (!src.params.contains(from))
        throw ConfigError(std::string(to_string(body ? Stream::kBody : Stream::kHand)) + " checkpoint lacks '" + from +
                          "' needed by branch " + nn::to_string(b));
      const Tensor& value = src.params.get(from).value();
      if (value.shape() != params.get(name).shape())
        throw ConfigError("pretrained '" + from + "' has shape " + nn::shape_string(value.shape()) + " but branch " +
                          nn::to_string(b) + " expects " + nn::shape_string(params.get(name).shape()));
      params.set(name, value, params.get(name).requires_grad());
    }
  }
}

TrainResult finetune_dual(const PreparedSplit& split, const nn::Checkpoint& body_ckpt, const nn::Checkpoint& hand_ckpt,
                          nn::Variant variant, const fusion::LossWeights& weights, const TrainConfig& cfg) {
  cfg.validate();
  weights.validate();
  if (split.samples.empty()) throw InputError("finetune_dual: empty split");
  const auto t0 = std::chrono::steady_clock::now();

  auto spec = nn::ModelSpec::for_variant(variant, split.class_count, cfg.channels);
  spec.temporal_kernel = cfg.temporal_kernel;
  nn::DualStreamNet net(spec, body_topo(), hand_topo());
  nn::ParamStore params = net.init_params(cfg.seed);
  load_pretrained(params, net, body_ckpt, hand_ckpt);
  nn::SgdMomentum opt(cfg.lr, cfg.momentum);
  const auto inputs = clean_inputs(split);

  TrainReport report;
  report.seed = cfg.seed;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    EpochLosses sums{epoch};
    for (const auto& idx : epoch_batches(inputs.labels.size(), cfg.batch_size, cfg.seed, epoch)) {
      std::vector<int> labels;
      for (auto i : idx) labels.push_back(inputs.labels[i]);
      const auto logits = net.forward(params, Var::constant(batch_of(inputs.body, idx)),
                                      Var::constant(batch_of(inputs.hand, idx)));
      const auto terms = fusion::loss_terms(logits, variant, labels, weights);
      require_finite(terms.total.value().item(), epoch);
      nn::backward(terms.total);
      opt.step(params);
      params.zero_grad();
      const double n = static_cast<double>(idx.size());
      sums.idv += terms.idv.value().item() * n;
      sums.cpl += terms.cpl.value().item() * n;
      sums.nor += terms.nor.value().item() * n;
      sums.total += terms.total.value().item() * n;
    }
    const double n = static_cast<double>(inputs.labels.size());
    report.epochs.push_back({epoch, sums.idv / n, sums.cpl / n, sums.nor / n, sums.total / n});
  }

  TrainResult result;
  result.checkpoint.spec = spec;
  result.checkpoint.stream = "dual";
  result.checkpoint.modality = modality::to_string(split.modality);
  result.checkpoint.seed = cfg.seed;
  result.checkpoint.params = std::move(params);
  report.train_accuracy = evaluate(result.checkpoint, split, 0.0, cfg.seed);
  report.wall_seconds = seconds_since(t0);
  result.report = std::move(report);
  return result;
}

// ---------------------------------------------------------------- evaluation

SkeletonSequence frame_drop(const SkeletonSequence& seq, double rate, std::uint64_t seed) {
  return frame_drop(seq, rate, seed, DropScope::kAll);
}

SkeletonSequence frame_drop(const SkeletonSequence& seq, double rate, std::uint64_t seed, DropScope scope) {
  if (!(rate >= 0.0 && rate < 1.0)) throw InputError("frame_drop: rate must lie in [0, 1)");
  // Guard against products like 0.1 * 30 landing just above an integer.
  const auto count = static_cast<std::size_t>(std::ceil(rate * seq.frames - 1e-9));
  if (count == 0) return seq;
  std::vector<int> frames(static_cast<std::size_t>(seq.frames));
  std::iota(frames.begin(), frames.end(), 0);
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, frames.size() - 1);
    std::swap(frames[i], frames[pick(rng)]);
  }
  int first = 0, last = seq.joints;
  if (scope == DropScope::kHand) {
    if (seq.topology_name == "combined") {
      first = layout::kLeftHandOffset;
      last = layout::kDummyOffset;
    } else if (seq.topology_name == "body") {
      return seq;
    }
  }
  SkeletonSequence out = seq;
  for (std::size_t i = 0; i < count; ++i)
    for (int v = first; v < last; ++v) out.mask(frames[i], v);
  return out;
}

EvalResult evaluate_detailed(const nn::Checkpoint& ckpt, const PreparedSplit& split, const EvalOptions& opts) {
  if (!(opts.drop_rate >= 0.0 && opts.drop_rate < 1.0)) throw InputError("drop rate must lie in [0, 1)");
  const std::size_t n = split.samples.size();
  const int K = ckpt.spec.class_count;
  if (split.class_count > K) throw InputError("split has more classes than the model");
  const bool corrupt = opts.drop_rate > 0.0;
  if (corrupt && split.raw.size() != n) throw InputError("frame drop needs the raw sequences of the split");
  const auto params = nn::frozen(ckpt.params);

  std::optional<nn::DualStreamNet> dual;
  std::optional<nn::StreamNet> single;
  if (ckpt.stream == "dual") {
    dual.emplace(ckpt.spec, body_topo(), hand_topo());
    dual->check_params(params);
  } else {
    const Stream s = parse_stream(ckpt.stream);
    single.emplace(ckpt.spec.channels, K, s == Stream::kBody ? body_topo() : hand_topo(), ckpt.spec.temporal_kernel);
  }

  EvalResult res;
  res.logits = Tensor({std::max<std::size_t>(n, 1), static_cast<std::size_t>(K)}, 0.0);
  res.predictions.assign(n, 0);
  for (const auto& s : split.samples) {
    res.labels.push_back(s.label);
    res.ids.push_back(s.id);
  }

  auto run_range = [&](std::size_t lo, std::size_t hi) {
    constexpr std::size_t kChunk = 16;
    for (std::size_t start = lo; start < hi; start += kChunk) {
      const std::size_t stop = std::min(hi, start + kChunk);
      std::vector<modality::ModalityTensor> body, hand;
      for (std::size_t i = start; i < stop; ++i) {
        const auto& s = split.samples[i];
        if (!corrupt) {
          body.push_back(modality::derive(s.body, body_topo(), split.modality));
          hand.push_back(modality::derive(s.hand, hand_topo(), split.modality));
          continue;
        }
        const auto dropped = frame_drop(split.raw[i], opts.drop_rate, derive_seed(opts.seed, i), opts.scope);
        const auto b = preprocess::run_pipeline(body_stream(dropped), split.preprocess.body, body_topo());
        const auto h = preprocess::run_pipeline(hand_stream(dropped), split.preprocess.hand, hand_topo());
        body.push_back(modality::derive(b, body_topo(), split.modality));
        hand.push_back(modality::derive(h, hand_topo(), split.modality));
      }
      std::vector<std::size_t> idx(body.size());
      std::iota(idx.begin(), idx.end(), 0);
      Tensor summed;
      if (dual) {
        const auto logits =
            dual->forward(params, Var::constant(batch_of(body, idx)), Var::constant(batch_of(hand, idx)));
        summed = Tensor(logits.by_branch.begin()->second.shape(), 0.0);
        for (const auto& [_, l] : logits.by_branch)
          for (std::size_t k = 0; k < summed.size(); ++k) summed[k] += l.value()[k];
      } else {
        const auto& xs = ckpt.stream == "body" ? body : hand;
        summed = single->forward(params, Var::constant(batch_of(xs, idx))).value();
      }
      const auto preds = fusion::argmax_rows(summed);
      for (std::size_t j = 0; j < idx.size(); ++j) {
        res.predictions[start + j] = preds[j];
        std::copy(summed.data() + j * K, summed.data() + (j + 1) * K, res.logits.data() + (start + j) * K);
      }
    }
  };

  const int threads = std::max(1, std::min<int>(opts.threads, static_cast<int>(std::max<std::size_t>(n, 1))));
  if (threads == 1) {
    run_range(0, n);
  } else {
    // Every sample lands in its own slot, so the result does not depend on scheduling.
    std::vector<std::thread> pool;
    const std::size_t per = (n + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
      const std::size_t lo = std::min(n, t * per), hi = std::min(n, lo + per);
      if (lo < hi) pool.emplace_back(run_range, lo, hi);
    }
    for (auto& th : pool) th.join();
  }
  res.accuracy = accuracy_of(res.predictions, res.labels);
  return res;
}

double evaluate(const nn::Checkpoint& ckpt, const PreparedSplit& split, double drop_rate, std::uint64_t seed,
                DropScope scope, int threads) {
  return evaluate_detailed(ckpt, split, {drop_rate, seed, scope, threads}).accuracy;
}

std::string RobustnessReport::to_csv() const {
  std::ostringstream os;
  os << "rate,accuracy";
  for (auto s : seeds) os << ",seed_" << s;
  os << '\n';
  for (std::size_t i = 0; i < rates.size(); ++i) {
    os << fmt(rates[i]) << ',' << fmt(accuracy[i]);
    for (double a : per_seed[i]) os << ',' << fmt(a);
    os << '\n';
  }
  return os.str();
}

RobustnessReport robustness_sweep(const nn::Checkpoint& ckpt, const PreparedSplit& split,
                                  const std::vector<double>& rates, const std::vector<std::uint64_t>& seeds,
                                  DropScope scope, int threads) {
  if (seeds.empty()) throw InputError("robustness_sweep: no seeds");
  RobustnessReport r;
  r.rates = rates;
  r.seeds = seeds;
  for (double rate : rates) {
    std::vector<double> accs;
    for (auto seed : seeds) accs.push_back(evaluate(ckpt, split, rate, seed, scope, threads));
    r.accuracy.push_back(std::accumulate(accs.begin(), accs.end(), 0.0) / static_cast<double>(accs.size()));
    r.per_seed.push_back(std::move(accs));
  }
  return r;
}

double accuracy_of(const std::vector<int>& predictions, const std::vector<int>& labels) {
  if (predictions.size() != labels.size()) throw InputError("predictions and labels differ in length");
  if (labels.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predictions[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

MetricsReport metrics_report(const std::vector<int>& predictions, const std::vector<int>& labels, int class_count) {
  if (predictions.size() != labels.size())
    throw InputError("metrics_report: " + std::to_string(predictions.size()) + " predictions for " +
                     std::to_string(labels.size()) + " labels");
  if (class_count < 1) throw InputError("metrics_report: class_count must be positive");
  MetricsReport m;
  const auto K = static_cast<std::size_t>(class_count);
  m.confusion.assign(K, std::vector<int>(K, 0));
  m.support.assign(K, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= class_count || predictions[i] < 0 || predictions[i] >= class_count)
      throw InputError("metrics_report: class index out of range");
    ++m.confusion[labels[i]][predictions[i]];
    ++m.support[labels[i]];
  }
  for (std::size_t k = 0; k < K; ++k) {
    if (m.support[k] == 0)
      m.per_class.push_back(std::nullopt);
    else
      m.per_class.push_back(static_cast<double>(m.confusion[k][k]) / m.support[k]);
  }
  m.overall = accuracy_of(predictions, labels);
  return m;
}

std::string MetricsReport::to_csv() const {
  std::ostringstream os;
  os << "class,support,accuracy";
  for (std::size_t k = 0; k < confusion.size(); ++k) os << ",pred_" << k;
  os << '\n';
  for (std::size_t k = 0; k < confusion.size(); ++k) {
    os << k << ',' << support[k] << ',' << (per_class[k] ? fmt(*per_class[k]) : std::string("undefined"));
    for (int c : confusion[k]) os << ',' << c;
    os << '\n';
  }
  os << "overall," << std::accumulate(support.begin(), support.end(), 0) << ',' << fmt(overall) << '\n';
  return os.str();
}

}  // namespace bharnet::harness
