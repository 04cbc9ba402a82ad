#include "mixlen/tensor.hpp"

#include <cmath>
#include <functional>
#include <numeric>

#include "mixlen/errors.hpp"

namespace mixlen {

namespace {

std::size_t element_count(const Tensor::Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

void check_rank(const Tensor::Shape& shape) {
  if (shape.size() > 2) {
    throw ShapeError("tensors are limited to rank 2, got " + mixlen::shape_string(shape));
  }
}

}  // namespace

std::string shape_string(const Tensor::Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(element_count(shape_), fill) {
  check_rank(shape_);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_rank(shape_);
  if (data_.size() != element_count(shape_)) {
    throw ShapeError("shape " + mixlen::shape_string(shape_) + " needs " +
                     std::to_string(element_count(shape_)) + " elements, got " +
                     std::to_string(data_.size()));
  }
}

Tensor Tensor::vector(std::vector<double> v) {
  const std::size_t n = v.size();
  return Tensor(Shape{n}, std::move(v));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> v) {
  return Tensor(Shape{rows, cols}, std::move(v));
}

double Tensor::item() const {
  if (data_.size() != 1) {
    throw ShapeError("item() on tensor of shape " + mixlen::shape_string(shape_));
  }
  return data_[0];
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::string Tensor::shape_string() const { return mixlen::shape_string(shape_); }

}  // namespace mixlen
