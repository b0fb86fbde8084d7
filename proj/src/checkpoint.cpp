#include "bharnet/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "bharnet/errors.hpp"
#include "json.hpp"

namespace bharnet::nn {

using nlohmann::json;

std::string format_checkpoint(const Checkpoint& ckpt) {
  json spec;
  spec["variant"] = to_string(ckpt.spec.variant);
  spec["channels"] = ckpt.spec.channels;
  spec["blocks"] = ckpt.spec.blocks;
  spec["class_count"] = ckpt.spec.class_count;
  spec["attention_enabled"] = ckpt.spec.attention_enabled;
  spec["temporal_kernel"] = ckpt.spec.temporal_kernel;
  spec["stream"] = ckpt.stream;
  spec["modality"] = ckpt.modality;

  json params = json::object();
  for (const auto& [name, v] : ckpt.params.entries()) {
    params[name] = {{"shape", v.shape()}, {"values", v.value().vector()}};
    if (!v.requires_grad()) params[name]["frozen"] = true;
  }
  json root;
  root["spec"] = std::move(spec);
  root["seed"] = ckpt.seed;
  root["params"] = std::move(params);
  // nlohmann prints doubles with round-trip precision.
  return root.dump(1);
}

Checkpoint parse_checkpoint(const std::string& text) {
  try {
    const json root = json::parse(text);
    Checkpoint ckpt;
    const auto& spec = root.at("spec");
    ckpt.spec.variant = parse_variant(spec.at("variant").get<std::string>());
    ckpt.spec.channels = spec.at("channels").get<std::vector<int>>();
    ckpt.spec.blocks = spec.at("blocks").get<int>();
    ckpt.spec.class_count = spec.at("class_count").get<int>();
    ckpt.spec.attention_enabled = spec.at("attention_enabled").get<bool>();
    ckpt.spec.temporal_kernel = spec.value("temporal_kernel", 3);
    ckpt.stream = spec.value("stream", std::string("dual"));
    ckpt.modality = spec.value("modality", std::string("J"));
    ckpt.seed = root.at("seed").get<std::uint64_t>();
    ckpt.params = ParamStore(ckpt.seed);
    for (const auto& [name, p] : root.at("params").items()) {
      ckpt.params.set(name, Tensor(p.at("shape").get<Shape>(), p.at("values").get<std::vector<double>>()),
                      !p.value("frozen", false));
    }
    return ckpt;
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write checkpoint '" + path + "'");
  out << format_checkpoint(ckpt) << '\n';
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open checkpoint '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_checkpoint(ss.str());
}

}  // namespace bharnet::nn
