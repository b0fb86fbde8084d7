#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "bharnet/fusion.hpp"
#include "bharnet/harness.hpp"
#include "bharnet/synthgen.hpp"

namespace bharnet {

/// Flat `key = value` experiment configuration. Every recognised key has a
/// default; unknown keys are rejected at parse time.
class ExperimentConfig {
 public:
  ExperimentConfig();

  /// Throws ConfigError on malformed lines or unknown keys.
  static ExperimentConfig parse(const std::string& text);
  static ExperimentConfig load(const std::string& path);

  /// Throws ConfigError on an unknown key.
  void set(const std::string& key, const std::string& value);
  const std::string& get(const std::string& key) const;
  bool is_set(const std::string& key) const;  // non-empty value
  /// Throws ConfigError naming the key if it is empty.
  const std::string& require(const std::string& key) const;

  double get_double(const std::string& key) const;
  long get_int(const std::string& key) const;
  std::uint64_t get_seed(const std::string& key = "seed") const;
  bool get_bool(const std::string& key) const;
  std::vector<double> get_doubles(const std::string& key) const;
  std::vector<int> get_ints(const std::string& key) const;

  nn::Variant variant() const;
  fusion::LossWeights loss_weights() const;
  harness::TrainConfig train_config(bool pretrain) const;
  harness::StreamPreprocess stream_preprocess() const;
  synth::SynthConfig synth_config() const;
  int threads() const;  // BHARNET_THREADS overrides the `threads` key

  /// Canonical "key=value" dump in key order.
  std::string canonical() const;
  std::uint64_t hash() const;

  static const std::map<std::string, std::string>& defaults();

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace bharnet
