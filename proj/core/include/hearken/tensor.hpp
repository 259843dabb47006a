#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "hearken/rng.hpp"

namespace hearken {

// Dense row-major tensor of doubles. Rank is 1 or 2 everywhere in this
// codebase; batch structure is expressed by building one graph per example.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::vector<int> shp, std::vector<double> values);

  static Tensor zeros(std::vector<int> shape);
  static Tensor full(std::vector<int> shape, double value);
  static Tensor scalar(double value);
  static Tensor row(std::vector<double> values);           // shape [n]
  static Tensor matrix(int rows, int cols, std::vector<double> values);
  static Tensor randn(std::vector<int> shape, SeededRng& rng, double stddev);

  std::size_t numel() const { return data.size(); }
  int rows() const;
  int cols() const;
  bool is_scalar() const { return data.size() == 1; }

  double& at(int r, int c);
  double at(int r, int c) const;

  bool same_shape(const Tensor& other) const { return shape == other.shape; }
  bool all_finite() const;

  std::string shape_str() const;
};

// numel consistency and finiteness checks; throws std::invalid_argument.
void check_tensor(const Tensor& t, const char* what);

bool bitwise_equal(const Tensor& a, const Tensor& b);

}  // namespace hearken
