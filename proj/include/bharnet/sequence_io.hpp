#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "bharnet/skeleton.hpp"

namespace bharnet {

/// Parses one JSONL record. Throws InputError when a field is missing or when
/// the flat coords/valid lengths disagree with C*T*V / T*V.
SkeletonSequence parse_sequence(const std::string& line);
std::string format_sequence(const SkeletonSequence& seq);

std::vector<SkeletonSequence> read_sequences(std::istream& in);
std::vector<SkeletonSequence> read_sequences_file(const std::string& path);
void write_sequences(std::ostream& out, const std::vector<SkeletonSequence>& seqs);
void write_sequences_file(const std::string& path, const std::vector<SkeletonSequence>& seqs);

}  // namespace bharnet
