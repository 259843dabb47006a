#include "hearken/tensor.hpp"

#include <cmath>
#include <cstring>
#include <sstream>
#include <stdexcept>

namespace hearken {

namespace {
std::size_t shape_numel(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor dimension must be positive");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}
}  // namespace

Tensor::Tensor(std::vector<int> shp, std::vector<double> values)
    : shape(std::move(shp)), data(std::move(values)) {
  if (shape_numel(shape) != data.size()) {
    throw std::invalid_argument("tensor shape " + shape_str() + " does not match value count " +
                                std::to_string(data.size()));
  }
}

Tensor Tensor::zeros(std::vector<int> shape) {
  std::size_t n = shape_numel(shape);
  Tensor t;
  t.shape = std::move(shape);
  t.data.assign(n, 0.0);
  return t;
}

Tensor Tensor::full(std::vector<int> shape, double value) {
  Tensor t = zeros(std::move(shape));
  for (auto& v : t.data) v = value;
  return t;
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

Tensor Tensor::row(std::vector<double> values) {
  int n = static_cast<int>(values.size());
  return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(int rows, int cols, std::vector<double> values) {
  return Tensor({rows, cols}, std::move(values));
}

Tensor Tensor::randn(std::vector<int> shape, SeededRng& rng, double stddev) {
  Tensor t = zeros(std::move(shape));
  for (auto& v : t.data) v = rng.normal(0.0, stddev);
  return t;
}

// Rank-1 tensors are treated as a single row everywhere.
int Tensor::rows() const { return shape.size() < 2 ? 1 : shape[0]; }

int Tensor::cols() const {
  if (shape.empty()) return 1;
  return shape.back();
}

double& Tensor::at(int r, int c) { return data[static_cast<std::size_t>(r) * cols() + c]; }

double Tensor::at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols() + c]; }

bool Tensor::all_finite() const {
  for (double v : data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

void check_tensor(const Tensor& t, const char* what) {
  if (shape_numel(t.shape) != t.data.size()) {
    throw std::invalid_argument(std::string(what) + ": shape/data mismatch");
  }
  if (!t.all_finite()) {
    throw std::invalid_argument(std::string(what) + ": non-finite values");
  }
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
  if (a.shape != b.shape) return false;
  if (a.data.size() != b.data.size()) return false;
  if (a.data.empty()) return true;
  return std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(double)) == 0;
}

}  // namespace hearken
