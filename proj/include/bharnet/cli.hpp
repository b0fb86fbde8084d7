#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "bharnet/harness.hpp"
#include "bharnet/tensor.hpp"

namespace bharnet::cli {

inline constexpr const char* kVersion = "bharnet 0.1.0";

/// Exit status: 0 success, 1 runtime failure, 2 usage or configuration error.
int run(int argc, char** argv);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct LogitsFile {
  std::vector<std::string> ids;
  nn::Tensor logits;  // [N, K]
  std::optional<std::vector<int>> labels;
};

/// JSONL rows {"id", "logits": [K], "label"?}. Throws InputError naming the
/// file on malformed rows or ragged widths.
LogitsFile read_logits(const std::string& path);
void write_logits(const std::string& path, const std::vector<std::string>& ids, const nn::Tensor& logits,
                  const std::vector<int>* labels);

/// Writes `<artifact>.manifest.json`. Inputs are recorded with an FNV-1a
/// digest of their bytes; no timestamps are written.
void write_manifest(const std::string& artifact, const std::string& command, const std::vector<std::string>& inputs,
                    std::uint64_t config_hash, std::uint64_t seed);

}  // namespace bharnet::cli
