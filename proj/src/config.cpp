#include "bharnet/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "bharnet/errors.hpp"
#include "bharnet/rng.hpp"

namespace bharnet {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

const std::map<std::string, std::string>& ExperimentConfig::defaults() {
  static const std::map<std::string, std::string> d = {
      // model and losses
      {"variant", "E"},
      {"channels", "16,32"},
      {"temporal_kernel", "3"},
      {"lambda_idv", "1.0"},
      {"lambda_cpl", "1.0"},
      {"lambda_nor", "1.0"},
      // optimisation
      {"lr", "0.05"},
      {"momentum", "0.9"},
      {"epochs_pretrain", "30"},
      {"epochs_finetune", "20"},
      {"batch_size", "8"},
      // preprocessing
      {"target_length", "64"},
      {"max_gap", "5"},
      {"canonical", "off"},
      {"modality", "J"},
      // synthetic data
      {"body_motifs", "3"},
      {"hand_motifs", "3"},
      {"samples_per_class", "40"},
      {"frames", "64"},
      {"sigma_body", "0.005"},
      {"sigma_hand", "0.03"},
      {"hand_dropout_rate", "0.1"},
      // ensembles and evaluation
      {"ensemble_weights", "2,2,1,1"},
      {"drop_scope", "all"},
      // run control
      {"seed", "0"},
      {"threads", "1"},
      // paths
      {"train_data", ""},
      {"test_data", ""},
      {"body_ckpt", ""},
      {"hand_ckpt", ""},
      {"out_dir", ""},
  };
  return d;
}

ExperimentConfig::ExperimentConfig() : values_(defaults()) {}

ExperimentConfig ExperimentConfig::parse(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second = value;
}

const std::string& ExperimentConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

bool ExperimentConfig::is_set(const std::string& key) const { return !get(key).empty(); }

const std::string& ExperimentConfig::require(const std::string& key) const {
  const auto& v = get(key);
  if (v.empty()) throw ConfigError("required config key '" + key + "' is not set");
  return v;
}

double ExperimentConfig::get_double(const std::string& key) const {
  const auto& v = require(key);
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' is not a number: '" + v + "'");
  }
}

long ExperimentConfig::get_int(const std::string& key) const {
  const auto& v = require(key);
  try {
    std::size_t used = 0;
    const long n = std::stol(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return n;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' is not an integer: '" + v + "'");
  }
}

std::uint64_t ExperimentConfig::get_seed(const std::string& key) const {
  const auto& v = require(key);
  try {
    std::size_t used = 0;
    const auto n = std::stoull(v, &used);
    if (used != v.size() || v.front() == '-') throw std::invalid_argument(v);
    return n;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' is not a seed: '" + v + "'");
  }
}

bool ExperimentConfig::get_bool(const std::string& key) const {
  const auto& v = require(key);
  if (v == "on" || v == "true" || v == "1") return true;
  if (v == "off" || v == "false" || v == "0") return false;
  throw ConfigError("config key '" + key + "' must be on/off: '" + v + "'");
}

std::vector<double> ExperimentConfig::get_doubles(const std::string& key) const {
  std::vector<double> out;
  for (const auto& item : split_list(require(key))) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "' has a non-numeric entry '" + item + "'");
    }
  }
  return out;
}

std::vector<int> ExperimentConfig::get_ints(const std::string& key) const {
  std::vector<int> out;
  for (const auto& item : split_list(require(key))) {
    try {
      out.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "' has a non-integer entry '" + item + "'");
    }
  }
  return out;
}

nn::Variant ExperimentConfig::variant() const { return nn::parse_variant(require("variant")); }

fusion::LossWeights ExperimentConfig::loss_weights() const {
  fusion::LossWeights w{get_double("lambda_idv"), get_double("lambda_cpl"), get_double("lambda_nor")};
  w.validate();
  return w;
}

harness::TrainConfig ExperimentConfig::train_config(bool pretrain) const {
  harness::TrainConfig t;
  t.lr = get_double("lr");
  t.momentum = get_double("momentum");
  t.epochs = static_cast<int>(get_int(pretrain ? "epochs_pretrain" : "epochs_finetune"));
  t.batch_size = static_cast<int>(get_int("batch_size"));
  t.seed = get_seed();
  t.channels = get_ints("channels");
  t.temporal_kernel = static_cast<int>(get_int("temporal_kernel"));
  t.validate();
  return t;
}

harness::StreamPreprocess ExperimentConfig::stream_preprocess() const {
  harness::StreamPreprocess p;
  for (auto* c : {&p.body, &p.hand}) {
    c->target_length = static_cast<int>(get_int("target_length"));
    c->max_gap = static_cast<int>(get_int("max_gap"));
    c->validate();
  }
  p.hand.canonical = get_bool("canonical");
  p.modality = modality::parse_kind(require("modality"));
  return p;
}

synth::SynthConfig ExperimentConfig::synth_config() const {
  synth::SynthConfig s;
  s.body_motifs = static_cast<int>(get_int("body_motifs"));
  s.hand_motifs = static_cast<int>(get_int("hand_motifs"));
  s.samples_per_class = static_cast<int>(get_int("samples_per_class"));
  s.frames = static_cast<int>(get_int("frames"));
  s.sigma_body = get_double("sigma_body");
  s.sigma_hand = get_double("sigma_hand");
  s.hand_dropout_rate = get_double("hand_dropout_rate");
  s.seed = get_seed();
  s.validate();
  return s;
}

int ExperimentConfig::threads() const {
  if (const char* env = std::getenv("BHARNET_THREADS"); env && *env) {
    try {
      const int n = std::stoi(env);
      if (n >= 1) return n;
    } catch (const std::exception&) {
    }
    throw ConfigError(std::string("BHARNET_THREADS must be a positive integer, got '") + env + "'");
  }
  const long n = get_int("threads");
  if (n < 1) throw ConfigError("threads must be >= 1");
  return static_cast<int>(n);
}

std::string ExperimentConfig::canonical() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
  return out;
}

std::uint64_t ExperimentConfig::hash() const { return fnv1a(canonical()); }

}  // namespace bharnet
