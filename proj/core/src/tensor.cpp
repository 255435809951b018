#include "boxseg/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "boxseg/errors.hpp"

namespace boxseg {

int shape_numel(const std::vector<int>& shape) {
  if (shape.empty()) {
    throw std::invalid_argument("tensor shape must have at least one dimension");
  }
  long long n = 1;
  for (int d : shape) {
    if (d <= 0) {
      throw std::invalid_argument("tensor dimension must be positive, got " +
                                  std::to_string(d) + " in " + shape_to_string(shape));
    }
    n *= d;
  }
  if (n > (1LL << 31)) {
    throw std::invalid_argument("tensor too large: " + shape_to_string(shape));
  }
  return static_cast<int>(n);
}

std::string shape_to_string(const std::vector<int>& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

Tensor::Tensor(std::vector<int> s, double fill) : shape(std::move(s)) {
  data.assign(static_cast<size_t>(shape_numel(shape)), fill);
}

Tensor Tensor::from_data(std::vector<int> s, std::vector<double> values) {
  const int n = shape_numel(s);
  if (static_cast<size_t>(n) != values.size()) {
    throw std::invalid_argument("data length " + std::to_string(values.size()) +
                                " does not match shape " + shape_to_string(s));
  }
  Tensor t;
  t.shape = std::move(s);
  t.data = std::move(values);
  if (!t.all_finite()) {
    throw NumericError("tensor data contains NaN or Inf");
  }
  return t;
}

bool Tensor::all_finite() const {
  for (double v : data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace boxseg
