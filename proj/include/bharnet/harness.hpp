#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bharnet/checkpoint.hpp"
#include "bharnet/fusion.hpp"
#include "bharnet/modality.hpp"
#include "bharnet/preprocess.hpp"
#include "bharnet/skeleton.hpp"

namespace bharnet::harness {

enum class Stream { kBody, kHand };
enum class DropScope { kAll, kHand };

const char* to_string(Stream s);
Stream parse_stream(const std::string& s);
DropScope parse_drop_scope(const std::string& s);

struct TrainConfig {
  double lr = 0.05;
  double momentum = 0.9;
  int epochs = 30;
  int batch_size = 8;
  std::uint64_t seed = 0;
  std::vector<int> channels{16, 32};
  int temporal_kernel = 3;

  void validate() const;
};

/// Preprocessing applied to the two streams of a combined-topology sequence.
struct StreamPreprocess {
  preprocess::PreprocessConfig body{64, 5, preprocess::Centering::kBodyHip, false};
  preprocess::PreprocessConfig hand{64, 5, preprocess::Centering::kHandWrist, false};
  modality::Kind modality = modality::Kind::kJoint;
};

/// A preprocessed sample: body on the 25-joint graph, hands on the 42-joint graph.
struct Sample {
  std::string id;
  SkeletonSequence body;
  SkeletonSequence hand;
  int label = 0;
};

struct PreparedSplit {
  std::vector<Sample> samples;
  int class_count = 0;
  modality::Kind modality = modality::Kind::kJoint;
  // Kept so that evaluation can corrupt the raw sequences and re-run the pipeline.
  std::vector<SkeletonSequence> raw;
  StreamPreprocess preprocess;
};

/// Splits every combined sequence into streams and runs each stream's pipeline.
PreparedSplit prepare(const DatasetSplit& split, const StreamPreprocess& cfg);

struct EpochLosses {
  int epoch = 0;
  double idv = 0.0;
  double cpl = 0.0;
  double nor = 0.0;
  double total = 0.0;
};

struct TrainReport {
  std::vector<EpochLosses> epochs;
  double train_accuracy = 0.0;
  double wall_seconds = 0.0;  // informational; excluded from serialised reports
  std::uint64_t seed = 0;

  /// "epoch,L_idv,L_cpl,L_nor,L_total" rows.
  std::string losses_csv() const;
};

struct TrainResult {
  nn::Checkpoint checkpoint;
  TrainReport report;
};

/// Stage one: a single-stream backbone trained with softmax cross-entropy.
/// Throws InputError on an empty split, TrainingError on a non-finite loss.
TrainResult pretrain_stream(const PreparedSplit& split, Stream stream, const TrainConfig& cfg);

/// Widths a stage-one checkpoint must have to seed a given variant.
std::vector<int> pretrain_widths(nn::Variant variant, const std::vector<int>& channels);

/// Stage two: the dual-stream model, initialised from both pretrained
/// streams (expert and interactive branches alike), trained on loss_total.
/// Throws ConfigError when a checkpoint's shapes do not fit the variant.
TrainResult finetune_dual(const PreparedSplit& split, const nn::Checkpoint& body_ckpt, const nn::Checkpoint& hand_ckpt,
                          nn::Variant variant, const fusion::LossWeights& weights, const TrainConfig& cfg);

/// Copies the pretrained stream weights into the matching dual-stream branches.
void load_pretrained(nn::ParamStore& params, const nn::DualStreamNet& net, const nn::Checkpoint& body_ckpt,
                     const nn::Checkpoint& hand_ckpt);

/// Zero-masks ceil(rate * T) distinct frames chosen uniformly from `seed`.
SkeletonSequence frame_drop(const SkeletonSequence& seq, double rate, std::uint64_t seed);
/// As frame_drop, but on a combined-topology sequence only the hand joints
/// are masked when scope is kHand.
SkeletonSequence frame_drop(const SkeletonSequence& seq, double rate, std::uint64_t seed, DropScope scope);

struct EvalOptions {
  double drop_rate = 0.0;
  std::uint64_t seed = 0;
  DropScope scope = DropScope::kAll;
  int threads = 1;
};

struct EvalResult {
  std::vector<int> predictions;
  std::vector<int> labels;
  std::vector<std::string> ids;
  nn::Tensor logits;  // [N, K]; summed over branches for dual-stream models
  double accuracy = 0.0;
};

/// Runs frame_drop on each raw sequence -> preprocessing -> modality ->
/// forward -> predict. Pure: neither the checkpoint nor the split is modified.
EvalResult evaluate_detailed(const nn::Checkpoint& ckpt, const PreparedSplit& split, const EvalOptions& opts);
double evaluate(const nn::Checkpoint& ckpt, const PreparedSplit& split, double drop_rate, std::uint64_t seed,
                DropScope scope = DropScope::kAll, int threads = 1);

struct RobustnessReport {
  std::vector<double> rates;
  std::vector<double> accuracy;  // mean over seeds, aligned with rates
  std::vector<std::vector<double>> per_seed;
  std::vector<std::uint64_t> seeds;

  /// "rate,accuracy" then one column per seed.
  std::string to_csv() const;
};

RobustnessReport robustness_sweep(const nn::Checkpoint& ckpt, const PreparedSplit& split,
                                  const std::vector<double>& rates, const std::vector<std::uint64_t>& seeds,
                                  DropScope scope = DropScope::kAll, int threads = 1);

struct MetricsReport {
  double overall = 0.0;
  std::vector<std::optional<double>> per_class;  // nullopt for classes without support
  std::vector<int> support;
  std::vector<std::vector<int>> confusion;  // [true][predicted]

  std::string to_csv() const;
};

MetricsReport metrics_report(const std::vector<int>& predictions, const std::vector<int>& labels, int class_count);

// ---------------------------------------------------------------- ensembles

struct EnsembleEntry {
  std::string tag;  // J, B, JM, BM, RGB or custom
  double weight = 1.0;
  std::string source;
};

struct EnsembleSpec {
  std::vector<EnsembleEntry> entries;

  void validate() const;
  /// The four-stream skeleton ensemble 2(J + B) + (JM + BM).
  static EnsembleSpec skeleton();
  /// Five streams with RGB: 2(J + B) + (JM + BM) + 3 RGB.
  static EnsembleSpec with_rgb();
};

/// Parses "tag weight [source]" lines; '#' starts a comment.
EnsembleSpec parse_ensemble_spec(const std::string& text);

/// sum_i w_i * logits_i. Throws InputError on count or shape mismatch.
nn::Tensor ensemble_logits(const EnsembleSpec& spec, const std::vector<nn::Tensor>& logits);

struct SweepRow {
  std::vector<double> scales;
  double accuracy = 0.0;
};

/// Full factorial over per-entry weight scales from scale_grid.
std::vector<SweepRow> weight_perturbation_sweep(const EnsembleSpec& spec, const std::vector<nn::Tensor>& logits,
                                                const std::vector<int>& labels, const std::vector<double>& scale_grid);
std::string sweep_csv(const EnsembleSpec& spec, const std::vector<SweepRow>& rows);

double accuracy_of(const std::vector<int>& predictions, const std::vector<int>& labels);

}  // namespace bharnet::harness
