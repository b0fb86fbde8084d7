#include <cmath>
#include <iomanip>
#include <sstream>

#include "bharnet/errors.hpp"
#include "bharnet/fusion.hpp"
#include "bharnet/harness.hpp"

namespace bharnet::harness {

void EnsembleSpec::validate() const {
  if (entries.empty()) throw InputError("ensemble spec has no entries");
  for (const auto& e : entries)
    if (!std::isfinite(e.weight)) throw InputError("ensemble weight for '" + e.tag + "' is not finite");
}

EnsembleSpec EnsembleSpec::skeleton() { return {{{"J", 2.0, ""}, {"B", 2.0, ""}, {"JM", 1.0, ""}, {"BM", 1.0, ""}}}; }

EnsembleSpec EnsembleSpec::with_rgb() {
  auto spec = skeleton();
  spec.entries.push_back({"RGB", 3.0, ""});
  return spec;
}

EnsembleSpec parse_ensemble_spec(const std::string& text) {
  EnsembleSpec spec;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    EnsembleEntry e;
    if (!(ls >> e.tag)) continue;
    if (!(ls >> e.weight)) throw ConfigError("ensemble spec line " + std::to_string(lineno) + ": missing weight");
    ls >> e.source;
    spec.entries.push_back(std::move(e));
  }
  spec.validate();
  return spec;
}

nn::Tensor ensemble_logits(const EnsembleSpec& spec, const std::vector<nn::Tensor>& logits) {
  spec.validate();
  if (logits.size() != spec.entries.size())
    throw InputError("ensemble: " + std::to_string(spec.entries.size()) + " entries but " +
                     std::to_string(logits.size()) + " logit sets");
  const auto& shape = logits.front().shape();
  if (shape.size() != 2) throw InputError("ensemble: logits must be [batch, K]");
  nn::Tensor out(shape, 0.0);
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (logits[i].shape() != shape)
      throw InputError("ensemble: logits for '" + spec.entries[i].tag + "' have shape " +
                       nn::shape_string(logits[i].shape()) + ", expected " + nn::shape_string(shape));
    const double w = spec.entries[i].weight;
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += w * logits[i][k];
  }
  return out;
}

std::vector<SweepRow> weight_perturbation_sweep(const EnsembleSpec& spec, const std::vector<nn::Tensor>& logits,
                                                const std::vector<int>& labels, const std::vector<double>& scale_grid) {
  spec.validate();
  if (scale_grid.empty()) throw InputError("weight sweep: empty scale grid");
  for (double s : scale_grid)
    if (!(s > 0.0) || !std::isfinite(s)) throw InputError("weight sweep: scales must be positive");

  const std::size_t n = spec.entries.size();
  std::vector<std::size_t> digit(n, 0);
  std::vector<SweepRow> rows;
  // Odometer over the grid, first entry slowest.
  while (true) {
    EnsembleSpec scaled = spec;
    SweepRow row;
    for (std::size_t i = 0; i < n; ++i) {
      row.scales.push_back(scale_grid[digit[i]]);
      scaled.entries[i].weight *= scale_grid[digit[i]];
    }
    row.accuracy = accuracy_of(fusion::argmax_rows(ensemble_logits(scaled, logits)), labels);
    rows.push_back(std::move(row));

    std::size_t pos = n;
    while (pos > 0) {
      --pos;
      if (++digit[pos] < scale_grid.size()) break;
      digit[pos] = 0;
      if (pos == 0) return rows;
    }
    if (n == 0) return rows;
  }
}

std::string sweep_csv(const EnsembleSpec& spec, const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  for (const auto& e : spec.entries) os << "scale_" << e.tag << ',';
  os << "accuracy\n";
  os << std::setprecision(10);
  for (const auto& r : rows) {
    for (double s : r.scales) os << s << ',';
    os << r.accuracy << '\n';
  }
  return os.str();
}

}  // namespace bharnet::harness
