#include "recore/autodiff/array.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "recore/common/error.hpp"

namespace recore::ad {

std::int64_t numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

void validate_extents(const Shape& shape) {
  for (auto e : shape) {
    if (e <= 0) throw ShapeError("array extents must be positive, got " + to_string(shape));
  }
}

}  // namespace

template <typename T>
BasicArray<T>::BasicArray(Shape shape, T fill) : shape_(std::move(shape)) {
  validate_extents(shape_);
  data_.assign(static_cast<std::size_t>(numel(shape_)), fill);
}

template <typename T>
BasicArray<T>::BasicArray(Shape shape, std::vector<T> data)
    : shape_(std::move(shape)), data_(data.begin(), data.end()) {
  validate_extents(shape_);
  if (static_cast<std::int64_t>(data_.size()) != numel(shape_)) {
    throw ShapeError("array data length " + std::to_string(data_.size()) +
                     " does not match shape " + to_string(shape_));
  }
}

template <typename T>
std::int64_t BasicArray<T>::dim(int axis) const {
  const int r = rank();
  const int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " + to_string(shape_));
  }
  return shape_[static_cast<std::size_t>(a)];
}

template <typename T>
T BasicArray<T>::item() const {
  if (data_.size() != 1) throw ShapeError("item() on non-scalar shape " + to_string(shape_));
  return data_[0];
}

template <typename T>
void BasicArray<T>::fill(T v) {
  std::fill(data_.begin(), data_.end(), v);
}

template <typename T>
bool BasicArray<T>::all_finite() const {
  // x - x is 0 for finite x and NaN otherwise; Eigen vectorizes the scan.
  const Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>> a(data_.data(), static_cast<Eigen::Index>(data_.size()));
  return ((a - a) == T(0)).all();
}

template <typename T>
BasicArray<T> BasicArray<T>::reshaped(Shape shape) const {
  if (numel(shape) != size()) {
    throw ShapeError("reshape: cannot view " + to_string(shape_) + " as " + to_string(shape));
  }
  BasicArray out = *this;
  out.shape_ = std::move(shape);
  return out;
}

template class BasicArray<float>;
template class BasicArray<double>;

}  // namespace recore::ad
