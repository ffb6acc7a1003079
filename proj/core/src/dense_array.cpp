#include "msstrn/dense_array.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "msstrn/errors.hpp"

namespace msstrn {

std::string to_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i != 0) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

namespace {

void require_positive_dims(const Shape& shape) {
  for (std::size_t d : shape) {
    if (d == 0) throw ShapeError("zero-sized dimension in shape " + to_string(shape));
  }
}

}  // namespace

DenseArray::DenseArray(Shape shape, double fill) : shape_(std::move(shape)) {
  require_positive_dims(shape_);
  data_.assign(element_count(shape_), fill);
}

DenseArray::DenseArray(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  require_positive_dims(shape_);
  if (element_count(shape_) != data_.size()) {
    throw ShapeError("shape " + to_string(shape_) + " does not hold " +
                     std::to_string(data_.size()) + " values");
  }
}

DenseArray DenseArray::scalar(double value) { return DenseArray({1}, value); }

DenseArray DenseArray::identity(std::size_t n) {
  DenseArray out({n, n});
  for (std::size_t i = 0; i < n; ++i) out.data_[i * n + i] = 1.0;
  return out;
}

std::size_t DenseArray::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " + to_string(shape_));
  }
  return shape_[axis];
}

std::size_t DenseArray::offset(std::initializer_list<std::size_t> index) const {
  if (index.size() != shape_.size()) {
    throw ShapeError("index rank " + std::to_string(index.size()) + " does not match " +
                     to_string(shape_));
  }
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (std::size_t i : index) {
    if (i >= shape_[axis]) throw ShapeError("index out of range for " + to_string(shape_));
    flat = flat * shape_[axis] + i;
    ++axis;
  }
  return flat;
}

double& DenseArray::at(std::initializer_list<std::size_t> index) { return data_[offset(index)]; }
double DenseArray::at(std::initializer_list<std::size_t> index) const { return data_[offset(index)]; }

double DenseArray::item() const {
  if (data_.size() != 1) throw ShapeError("item() on array of shape " + to_string(shape_));
  return data_[0];
}

DenseArray DenseArray::reshaped(Shape shape) const {
  if (element_count(shape) != data_.size()) {
    throw ShapeError("cannot reshape " + to_string(shape_) + " to " + to_string(shape));
  }
  return DenseArray(std::move(shape), data_);
}

void DenseArray::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool DenseArray::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double max_abs_difference(const DenseArray& a, const DenseArray& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

}  // namespace msstrn
