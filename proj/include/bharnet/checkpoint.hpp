#pragma once

#include <cstdint>
#include <string>

#include "bharnet/model.hpp"

namespace bharnet::nn {

/// Serialised model: {"spec": {...}, "seed": int, "params": {name: {shape, values}}}.
/// `stream` is "dual" for DualStreamNet checkpoints or "body"/"hand" for
/// single-stream pretraining checkpoints.
struct Checkpoint {
  ModelSpec spec;
  std::string stream = "dual";
  std::string modality = "J";
  std::uint64_t seed = 0;
  ParamStore params;
};

std::string format_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(const std::string& text);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace bharnet::nn
