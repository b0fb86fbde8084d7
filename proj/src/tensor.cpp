#include "bharnet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "bharnet/errors.hpp"

namespace bharnet::nn {

namespace {

#if defined(__GLIBC__)
// Training allocates the same large buffers every batch. Serving them from
// the heap instead of fresh mmap pages avoids a page-fault storm.
const bool kAllocatorTuned = [] {
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  return true;
}();
#endif

}  // namespace

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), values_(shape_size(shape_), fill) {
  for (auto d : shape_)
    if (d == 0) throw InputError("tensor dimensions must be positive: " + shape_string(shape_));
}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), values_(std::move(values)) {
  for (auto d : shape_)
    if (d == 0) throw InputError("tensor dimensions must be positive: " + shape_string(shape_));
  if (values_.size() != shape_size(shape_))
    throw InputError("tensor of shape " + shape_string(shape_) + " given " + std::to_string(values_.size()) +
                     " values");
}

double Tensor::item() const {
  if (values_.size() != 1) throw ContractError("item() on tensor of shape " + shape_string(shape_));
  return values_[0];
}

bool Tensor::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double x) { return std::isfinite(x); });
}

void Tensor::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

}  // namespace bharnet::nn
