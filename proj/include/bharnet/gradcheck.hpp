#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "bharnet/autograd.hpp"

namespace bharnet::nn {

struct GradcheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t checked = 0;  // scalar coordinates compared
  std::size_t kinked = 0;   // probes that crossed a ReLU kink; not compared
};

struct GradcheckReport {
  std::vector<GradcheckEntry> entries;
  double step = 1e-3;

  double max_rel_error() const;
  bool passed(double tolerance) const { return max_rel_error() < tolerance; }
  std::size_t kinked() const;
  /// One "name max_rel_error checked kinked" line per entry plus a summary line.
  std::string to_text() const;
};

/// |a - n| / max(|a|, |n|, 1e-6).
double relative_error(double analytic, double numeric);

/// Compares the reverse-mode gradient of `loss` with respect to every
/// coordinate of `inputs` against central differences of width 2*step.
/// `loss` must rebuild the graph from the inputs' current values. A
/// coordinate whose +-step probe flips any ReLU is counted in `kinked`
/// instead: the difference quotient there does not estimate the derivative.
GradcheckEntry check_gradient(const std::string& name, std::vector<Var> inputs, const std::function<Var()>& loss,
                              double step = 1e-3);

/// Every differentiable op, plus the full variant-E objective on a two-sample
/// batch with K = 4, a 25-joint body graph and a 21-joint hand graph.
GradcheckReport run_gradcheck(std::uint64_t seed, double step = 1e-3);

}  // namespace bharnet::nn
