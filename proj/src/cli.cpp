#include "bharnet/cli.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "bharnet/checkpoint.hpp"
#include "bharnet/config.hpp"
#include "bharnet/errors.hpp"
#include "bharnet/gradcheck.hpp"
#include "bharnet/modality.hpp"
#include "bharnet/plots.hpp"
#include "bharnet/preprocess.hpp"
#include "bharnet/rng.hpp"
#include "bharnet/sequence_io.hpp"
#include "bharnet/synthgen.hpp"

namespace bharnet::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << text;
  if (!out) throw InputError("failed writing '" + path + "'");
}

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

std::vector<double> parse_doubles(const std::string& list, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError(what + ": not a number '" + item + "'");
    }
  }
  if (out.empty()) throw ConfigError(what + ": empty list");
  return out;
}

ExperimentConfig load_config(const std::string& path) {
  return path.empty() ? ExperimentConfig() : ExperimentConfig::load(path);
}

// Explicit path, else the config key, else a synthetic split from the config.
DatasetSplit load_split(const std::string& flag, const ExperimentConfig& cfg, const std::string& key, SplitTag tag,
                        std::vector<std::string>& inputs) {
  const std::string path = !flag.empty() ? flag : cfg.get(key);
  if (path.empty()) return synth::generate_dataset(cfg.synth_config(), tag);
  inputs.push_back(path);
  DatasetSplit split;
  split.sequences = read_sequences_file(path);
  split.split_tag = tag;
  for (const auto& s : split.sequences) split.class_count = std::max(split.class_count, s.label + 1);
  return split;
}

struct Context {
  std::ostream& out;
  std::ostream& err;
};

// ------------------------------------------------------------- subcommands

void cmd_synth(Context& ctx, const std::string& config, const std::string& out, const std::string& split_name) {
  const auto cfg = load_config(config);
  SplitTag tag = SplitTag::kTrain;
  if (split_name == "val") tag = SplitTag::kVal;
  else if (split_name == "test") tag = SplitTag::kTest;
  else if (split_name != "train") throw ConfigError("unknown split '" + split_name + "' (train|val|test)");
  const auto split = synth::generate_dataset(cfg.synth_config(), tag);
  write_sequences_file(out, split.sequences);
  write_manifest(out, "synth", config.empty() ? std::vector<std::string>{} : std::vector<std::string>{config},
                 cfg.hash(), cfg.get_seed());
  ctx.out << "wrote " << split.sequences.size() << " sequences (" << split.class_count << " classes) to " << out
          << "\n";
}

void cmd_preprocess(Context& ctx, const std::string& in, const std::string& out, int target_length, int max_gap,
                    const std::string& canonical, const std::string& centering) {
  preprocess::PreprocessConfig pc;
  pc.target_length = target_length;
  pc.max_gap = max_gap;
  if (canonical != "on" && canonical != "off") throw ConfigError("--canonical must be on or off");
  pc.canonical = canonical == "on";
  pc.centering = preprocess::parse_centering(centering);
  pc.validate();
  std::vector<SkeletonSequence> result;
  for (const auto& seq : read_sequences_file(in))
    result.push_back(preprocess::run_pipeline(seq, pc, topology_by_name(seq.topology_name)));
  write_sequences_file(out, result);
  ExperimentConfig cfg;
  cfg.set("target_length", std::to_string(target_length));
  cfg.set("max_gap", std::to_string(max_gap));
  cfg.set("canonical", canonical);
  write_manifest(out, "preprocess", {in}, fnv1a(cfg.canonical() + "centering=" + centering + "\n"), 0);
  ctx.out << "preprocessed " << result.size() << " sequences to " << out << "\n";
}

void cmd_modality(Context& ctx, const std::string& in, const std::string& out_dir) {
  const auto seqs = read_sequences_file(in);
  std::array<std::ostringstream, 4> rows;
  for (const auto& seq : seqs) {
    const auto set = modality::modality_set(seq, topology_by_name(seq.topology_name));
    for (std::size_t k = 0; k < set.size(); ++k) {
      const auto& m = set[k];
      json j = {{"id", seq.id}, {"label", seq.label}, {"kind", modality::to_string(m.kind)},
                {"C", m.channels},  {"T", m.frames},     {"V", m.joints},
                {"data", m.data}};
      rows[k] << j.dump() << "\n";
    }
  }
  const modality::Kind kinds[] = {modality::Kind::kJoint, modality::Kind::kBone, modality::Kind::kJointMotion,
                                  modality::Kind::kBoneMotion};
  for (std::size_t k = 0; k < 4; ++k) {
    const std::string path = (fs::path(out_dir) / (std::string(modality::to_string(kinds[k])) + ".jsonl")).string();
    write_file(path, rows[k].str());
    write_manifest(path, "modality", {in}, 0, 0);
  }
  ctx.out << "derived 4 modalities for " << seqs.size() << " sequences into " << out_dir << "\n";
}

void cmd_train(Context& ctx, const std::string& stage, const std::string& stream_name, const std::string& variant_flag,
               const std::string& config, const std::string& data, std::string out, std::string body_ckpt,
               std::string hand_ckpt) {
  auto cfg = load_config(config);
  if (!variant_flag.empty()) cfg.set("variant", variant_flag);
  const auto variant = cfg.variant();
  std::vector<std::string> inputs;
  if (!config.empty()) inputs.push_back(config);
  const auto raw = load_split(data, cfg, "train_data", SplitTag::kTrain, inputs);
  const auto split = harness::prepare(raw, cfg.stream_preprocess());
  const fs::path out_dir = cfg.get("out_dir").empty() ? fs::path(".") : fs::path(cfg.get("out_dir"));

  harness::TrainResult result;
  if (stage == "pretrain") {
    const auto stream = harness::parse_stream(stream_name);
    auto tc = cfg.train_config(true);
    tc.channels = harness::pretrain_widths(variant, tc.channels);
    result = harness::pretrain_stream(split, stream, tc);
    if (out.empty()) out = (out_dir / (std::string("pretrain_") + harness::to_string(stream) + ".ckpt.json")).string();
  } else if (stage == "finetune") {
    if (body_ckpt.empty()) body_ckpt = cfg.require("body_ckpt");
    if (hand_ckpt.empty()) hand_ckpt = cfg.require("hand_ckpt");
    inputs.push_back(body_ckpt);
    inputs.push_back(hand_ckpt);
    result = harness::finetune_dual(split, nn::load_checkpoint(body_ckpt), nn::load_checkpoint(hand_ckpt), variant,
                                    cfg.loss_weights(), cfg.train_config(false));
    if (out.empty()) out = (out_dir / (std::string("finetune_") + nn::to_string(variant) + ".ckpt.json")).string();
  } else {
    throw ConfigError("unknown stage '" + stage + "' (pretrain|finetune)");
  }
  const fs::path p(out);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  nn::save_checkpoint(out, result.checkpoint);
  write_manifest(out, "train", inputs, cfg.hash(), cfg.get_seed());
  const std::string losses = out + ".losses.csv";
  write_file(losses, result.report.losses_csv());
  write_manifest(losses, "train", inputs, cfg.hash(), cfg.get_seed());
  ctx.out << "stage " << stage << ": final loss " << result.report.epochs.back().total << ", train accuracy "
          << result.report.train_accuracy << "\n";
  ctx.out << "checkpoint " << out << "\n";
}

harness::PreparedSplit eval_split(const ExperimentConfig& cfg, const nn::Checkpoint& ckpt, const std::string& data,
                                  std::vector<std::string>& inputs) {
  auto pre = cfg.stream_preprocess();
  pre.modality = modality::parse_kind(ckpt.modality);
  return harness::prepare(load_split(data, cfg, "test_data", SplitTag::kTest, inputs), pre);
}

void cmd_eval(Context& ctx, const std::string& ckpt_path, double rate, std::uint64_t seed, const std::string& config,
              const std::string& data, const std::string& scope, const std::string& logits_out,
              const std::string& report_out) {
  const auto cfg = load_config(config);
  std::vector<std::string> inputs{ckpt_path};
  if (!config.empty()) inputs.push_back(config);
  const auto ckpt = nn::load_checkpoint(ckpt_path);
  const auto split = eval_split(cfg, ckpt, data, inputs);
  const auto res = harness::evaluate_detailed(ckpt, split, {rate, seed, harness::parse_drop_scope(scope), cfg.threads()});
  ctx.out << "accuracy " << std::setprecision(6) << res.accuracy << "\n";
  const std::uint64_t h = fnv1a(cfg.canonical() + "drop_rate=" + std::to_string(rate) + "\nscope=" + scope + "\n");
  if (!logits_out.empty()) {
    write_logits(logits_out, res.ids, res.logits, &res.labels);
    write_manifest(logits_out, "eval", inputs, h, seed);
  }
  if (!report_out.empty()) {
    write_file(report_out, harness::metrics_report(res.predictions, res.labels, ckpt.spec.class_count).to_csv());
    write_manifest(report_out, "eval", inputs, h, seed);
  }
}

void cmd_robustness(Context& ctx, const std::string& ckpt_path, const std::string& rates_list, int seed_count,
                    const std::string& config, const std::string& data, const std::string& scope,
                    const std::string& out) {
  if (seed_count < 1) throw ConfigError("--seeds must be >= 1");
  const auto cfg = load_config(config);
  std::vector<std::string> inputs{ckpt_path};
  if (!config.empty()) inputs.push_back(config);
  const auto ckpt = nn::load_checkpoint(ckpt_path);
  const auto split = eval_split(cfg, ckpt, data, inputs);
  const auto rates = parse_doubles(rates_list, "--rates");
  std::vector<std::uint64_t> seeds;
  for (int s = 0; s < seed_count; ++s) seeds.push_back(static_cast<std::uint64_t>(s));
  const auto report =
      harness::robustness_sweep(ckpt, split, rates, seeds, harness::parse_drop_scope(scope), cfg.threads());
  const std::string csv = report.to_csv();
  ctx.out << csv;
  if (!out.empty()) {
    write_file(out, csv);
    write_manifest(out, "robustness", inputs, fnv1a(cfg.canonical() + "rates=" + rates_list + "\nscope=" + scope + "\n"),
                   static_cast<std::uint64_t>(seed_count));
  }
}

void cmd_ensemble(Context& ctx, const std::string& spec_path, const std::vector<std::string>& files,
                  const std::string& sweep, const std::string& out, const std::string& sweep_out) {
  const auto spec = harness::parse_ensemble_spec(read_file(spec_path));
  if (files.size() != spec.entries.size())
    throw InputError("spec lists " + std::to_string(spec.entries.size()) + " entries but " +
                     std::to_string(files.size()) + " logits files were given");
  std::vector<LogitsFile> loaded;
  for (const auto& f : files) loaded.push_back(read_logits(f));
  std::vector<nn::Tensor> logits;
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    if (loaded[i].logits.shape() != loaded[0].logits.shape())
      throw InputError(files[i] + ": logits shape " + nn::shape_string(loaded[i].logits.shape()) + " differs from " +
                       nn::shape_string(loaded[0].logits.shape()) + " in " + files[0]);
    if (loaded[i].ids != loaded[0].ids) throw InputError(files[i] + ": sample ids differ from " + files[0]);
    logits.push_back(loaded[i].logits);
  }
  const auto fused = harness::ensemble_logits(spec, logits);
  std::vector<std::string> inputs{spec_path};
  inputs.insert(inputs.end(), files.begin(), files.end());
  const std::uint64_t h = fnv1a(read_file(spec_path));
  const std::vector<int>* labels = loaded[0].labels ? &*loaded[0].labels : nullptr;
  if (labels) ctx.out << "accuracy " << harness::accuracy_of(fusion::argmax_rows(fused), *labels) << "\n";
  if (!out.empty()) {
    write_logits(out, loaded[0].ids, fused, labels);
    write_manifest(out, "ensemble", inputs, h, 0);
  }
  if (!sweep.empty()) {
    if (!labels) throw InputError(files[0] + ": the sweep needs labels in the logits file");
    const auto rows = harness::weight_perturbation_sweep(spec, logits, *labels, parse_doubles(sweep, "--sweep"));
    const std::string csv = harness::sweep_csv(spec, rows);
    if (sweep_out.empty()) {
      ctx.out << csv;
    } else {
      write_file(sweep_out, csv);
      write_manifest(sweep_out, "ensemble", inputs, fnv1a(sweep, h), 0);
    }
  }
}

int cmd_gradcheck(Context& ctx, std::uint64_t seed, const std::string& out) {
  const auto report = nn::run_gradcheck(seed);
  const std::string text = report.to_text();
  ctx.out << text;
  if (!out.empty()) {
    write_file(out, text);
    write_manifest(out, "gradcheck", {}, 0, seed);
  }
  constexpr double kTolerance = 1e-4;
  if (!report.passed(kTolerance)) {
    ctx.err << "gradient check failed: max relative error " << report.max_rel_error() << " >= " << kTolerance << "\n";
    return 1;
  }
  return 0;
}

void cmd_plot(Context& ctx, const std::vector<std::string>& robustness, const std::string& sweep,
              const std::string& out_dir) {
  if (robustness.empty() && sweep.empty()) throw ConfigError("plot: give --robustness and/or --sweep reports");
  if (!robustness.empty()) {
    std::vector<plots::Series> series;
    for (const auto& f : robustness)
      series.push_back(plots::robustness_series(plots::read_csv(f), fs::path(f).stem().string()));
    const std::string svg = (fs::path(out_dir) / "robustness.svg").string();
    const std::string csv = (fs::path(out_dir) / "robustness.csv").string();
    write_file(svg, plots::line_plot_svg(series, "accuracy vs frame drop rate"));
    write_file(csv, plots::merged_csv(series));
    write_manifest(svg, "plot", robustness, 0, 0);
    write_manifest(csv, "plot", robustness, 0, 0);
    ctx.out << "wrote " << svg << "\n";
  }
  if (!sweep.empty()) {
    const auto table = plots::read_csv(sweep);
    const std::string svg = (fs::path(out_dir) / "sweep.svg").string();
    const std::string csv = (fs::path(out_dir) / "sweep.csv").string();
    write_file(svg, plots::table_svg(table, "accuracy vs ensemble weight scale"));
    write_file(csv, read_file(sweep));
    write_manifest(svg, "plot", {sweep}, 0, 0);
    write_manifest(csv, "plot", {sweep}, 0, 0);
    ctx.out << "wrote " << svg << "\n";
  }
}

}  // namespace

// ------------------------------------------------------------------ files

LogitsFile read_logits(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open logits file '" + path + "'");
  LogitsFile f;
  std::vector<double> values;
  std::vector<int> labels;
  std::size_t K = 0;
  bool all_labelled = true;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = path + ":" + std::to_string(lineno);
    json j;
    try {
      j = json::parse(line);
      f.ids.push_back(j.at("id").get<std::string>());
      const auto row = j.at("logits").get<std::vector<double>>();
      if (f.ids.size() == 1) K = row.size();
      if (row.empty() || row.size() != K)
        throw InputError(where + ": expected " + std::to_string(K) + " logits, got " + std::to_string(row.size()));
      values.insert(values.end(), row.begin(), row.end());
      if (j.contains("label")) labels.push_back(j.at("label").get<int>());
      else all_labelled = false;
    } catch (const json::exception& e) {
      throw InputError(where + ": " + e.what());
    }
  }
  if (f.ids.empty()) throw InputError(path + ": no logits rows");
  f.logits = nn::Tensor({f.ids.size(), K}, std::move(values));
  if (all_labelled) f.labels = std::move(labels);
  return f;
}

void write_logits(const std::string& path, const std::vector<std::string>& ids, const nn::Tensor& logits,
                  const std::vector<int>* labels) {
  if (logits.rank() != 2 || logits.dim(0) != ids.size()) throw InputError("write_logits: ids and logits disagree");
  const std::size_t K = logits.dim(1);
  std::ostringstream os;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    json j;
    j["id"] = ids[i];
    j["logits"] = std::vector<double>(logits.data() + i * K, logits.data() + (i + 1) * K);
    if (labels) j["label"] = (*labels)[i];
    os << j.dump() << "\n";
  }
  write_file(path, os.str());
}

void write_manifest(const std::string& artifact, const std::string& command, const std::vector<std::string>& inputs,
                    std::uint64_t config_hash, std::uint64_t seed) {
  json m;
  m["artifact"] = fs::path(artifact).filename().string();
  m["artifact_fnv1a"] = hex(fnv1a(read_file(artifact)));
  m["command"] = command;
  json ins = json::array();
  for (const auto& path : inputs) ins.push_back({{"path", path}, {"fnv1a", hex(fnv1a(read_file(path)))}});
  m["inputs"] = ins;
  m["config_hash"] = hex(config_hash);
  m["seed"] = seed;
  m["version"] = kVersion;
  write_file(artifact + ".manifest.json", m.dump(2) + "\n");
}

// -------------------------------------------------------------------- run

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Context ctx{out, err};
  CLI::App app{"Body-hand skeleton action recognition laboratory", "bharnet"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  int status = 0;

  std::string config, out_path, data;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic split");
  std::string split_name = "train";
  synth->add_option("--config", config, "Experiment config");
  synth->add_option("--out", out_path, "Output JSONL")->required();
  synth->add_option("--split", split_name, "train|val|test")->capture_default_str();

  auto* pre = app.add_subcommand("preprocess", "Run the preprocessing pipeline");
  std::string in_path, canonical = "off", centering = "body_hip";
  int target_length = 64, max_gap = 5;
  pre->add_option("--in", in_path, "Input JSONL")->required();
  pre->add_option("--out", out_path, "Output JSONL")->required();
  pre->add_option("--target-length", target_length)->capture_default_str();
  pre->add_option("--max-gap", max_gap)->capture_default_str();
  pre->add_option("--canonical", canonical, "on|off")->capture_default_str();
  pre->add_option("--centering", centering, "body_hip|hand_wrist|none")->capture_default_str();

  auto* mod = app.add_subcommand("modality", "Derive J/B/JM/BM tensors");
  std::string out_dir;
  mod->add_option("--in", in_path, "Input JSONL")->required();
  mod->add_option("--out-dir", out_dir, "Output directory")->required();

  auto* train = app.add_subcommand("train", "Pretrain a stream or finetune the dual-stream model");
  std::string stage, stream = "body", variant, body_ckpt, hand_ckpt;
  train->add_option("--stage", stage, "pretrain|finetune")->required();
  train->add_option("--stream", stream, "body|hand (pretrain)")->capture_default_str();
  train->add_option("--variant", variant, "B|E|P (overrides config)");
  train->add_option("--config", config, "Experiment config");
  train->add_option("--data", data, "Training JSONL (overrides train_data)");
  train->add_option("--out", out_path, "Checkpoint path");
  train->add_option("--body-ckpt", body_ckpt, "Pretrained body checkpoint (finetune)");
  train->add_option("--hand-ckpt", hand_ckpt, "Pretrained hand checkpoint (finetune)");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  std::string ckpt, scope = "all", logits_out, report_out;
  double rate = 0.0;
  std::uint64_t seed = 0;
  eval->add_option("--ckpt", ckpt)->required();
  eval->add_option("--drop-rate", rate)->capture_default_str();
  eval->add_option("--seed", seed)->capture_default_str();
  eval->add_option("--config", config);
  eval->add_option("--data", data, "Test JSONL (overrides test_data)");
  eval->add_option("--drop-scope", scope, "all|hand")->capture_default_str();
  eval->add_option("--logits-out", logits_out);
  eval->add_option("--report", report_out, "Per-class metrics CSV");

  auto* ens = app.add_subcommand("ensemble", "Weighted logit-sum ensemble");
  std::string spec_path, sweep, sweep_out;
  std::vector<std::string> logit_files;
  ens->add_option("--spec", spec_path)->required();
  ens->add_option("--logits", logit_files)->required();
  ens->add_option("--sweep", sweep, "Per-entry scale grid, e.g. 0.5,1,1.5");
  ens->add_option("--out", out_path, "Fused logits JSONL");
  ens->add_option("--sweep-out", sweep_out, "Sweep CSV");

  auto* rob = app.add_subcommand("robustness", "Accuracy under frame drop");
  std::string rates = "0,0.25,0.5";
  int seed_count = 5;
  rob->add_option("--ckpt", ckpt)->required();
  rob->add_option("--rates", rates)->capture_default_str();
  rob->add_option("--seeds", seed_count, "Number of drop seeds")->capture_default_str();
  rob->add_option("--config", config);
  rob->add_option("--data", data);
  rob->add_option("--drop-scope", scope)->capture_default_str();
  rob->add_option("--out", out_path, "Report CSV");

  auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient check");
  gc->add_option("--seed", seed)->capture_default_str();
  gc->add_option("--out", out_path, "Report path");

  auto* plot = app.add_subcommand("plot", "Render report CSVs as SVG");
  std::vector<std::string> robustness_reports;
  std::string sweep_report;
  plot->add_option("--robustness", robustness_reports, "Robustness CSVs, one series each");
  plot->add_option("--sweep", sweep_report, "Sweep CSV");
  plot->add_option("--out-dir", out_dir)->required();

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  try {
    app.parse(argv_rev);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion& e) {
    out << kVersion << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*synth) cmd_synth(ctx, config, out_path, split_name);
    else if (*pre) cmd_preprocess(ctx, in_path, out_path, target_length, max_gap, canonical, centering);
    else if (*mod) cmd_modality(ctx, in_path, out_dir);
    else if (*train) cmd_train(ctx, stage, stream, variant, config, data, out_path, body_ckpt, hand_ckpt);
    else if (*eval) cmd_eval(ctx, ckpt, rate, seed, config, data, scope, logits_out, report_out);
    else if (*ens) cmd_ensemble(ctx, spec_path, logit_files, sweep, out_path, sweep_out);
    else if (*rob) cmd_robustness(ctx, ckpt, rates, seed_count, config, data, scope, out_path);
    else if (*gc) status = cmd_gradcheck(ctx, seed, out_path);
    else if (*plot) cmd_plot(ctx, robustness_reports, sweep_report, out_dir);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return status;
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace bharnet::cli
