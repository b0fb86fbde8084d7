#include "bharnet/sequence_io.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "bharnet/errors.hpp"
#include "json.hpp"

namespace bharnet {

using nlohmann::json;

SkeletonSequence parse_sequence(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw InputError(std::string("malformed sequence record: ") + e.what());
  }
  try {
    SkeletonSequence seq;
    seq.id = j.at("id").get<std::string>();
    seq.label = j.at("label").get<int>();
    seq.fps = j.at("fps").get<double>();
    seq.channels = j.at("C").get<int>();
    seq.frames = j.at("T").get<int>();
    seq.joints = j.at("V").get<int>();
    seq.topology_name = j.at("topology").get<std::string>();
    if (seq.channels <= 0 || seq.frames <= 0 || seq.joints <= 0)
      throw InputError("record '" + seq.id + "': C, T, V must be positive");

    const auto& coords = j.at("coords");
    const auto& valid = j.at("valid");
    const auto n_coords = static_cast<std::size_t>(seq.channels) * seq.frames * seq.joints;
    const auto n_valid = static_cast<std::size_t>(seq.frames) * seq.joints;
    if (!coords.is_array() || coords.size() != n_coords)
      throw InputError("record '" + seq.id + "': coords length " + std::to_string(coords.size()) +
                       " != C*T*V = " + std::to_string(n_coords));
    if (!valid.is_array() || valid.size() != n_valid)
      throw InputError("record '" + seq.id + "': valid length " + std::to_string(valid.size()) +
                       " != T*V = " + std::to_string(n_valid));
    seq.coords.reserve(n_coords);
    for (const auto& x : coords) seq.coords.push_back(x.get<double>());
    seq.valid.reserve(n_valid);
    for (const auto& b : valid) seq.valid.push_back(b.is_boolean() ? b.get<bool>() : b.get<int>() != 0);
    return seq;
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed sequence record: ") + e.what());
  }
}

std::string format_sequence(const SkeletonSequence& seq) {
  json j;
  j["id"] = seq.id;
  j["label"] = seq.label;
  j["fps"] = seq.fps;
  j["C"] = seq.channels;
  j["T"] = seq.frames;
  j["V"] = seq.joints;
  j["topology"] = seq.topology_name;
  j["coords"] = seq.coords;
  json valid = json::array();
  for (bool b : seq.valid) valid.push_back(b);
  j["valid"] = std::move(valid);
  return j.dump();
}

std::vector<SkeletonSequence> read_sequences(std::istream& in) {
  std::vector<SkeletonSequence> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(parse_sequence(line));
  }
  return out;
}

std::vector<SkeletonSequence> read_sequences_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  return read_sequences(in);
}

void write_sequences(std::ostream& out, const std::vector<SkeletonSequence>& seqs) {
  for (const auto& s : seqs) out << format_sequence(s) << '\n';
}

void write_sequences_file(const std::string& path, const std::vector<SkeletonSequence>& seqs) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  write_sequences(out, seqs);
}

}  // namespace bharnet
