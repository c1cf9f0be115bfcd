#pragma once

#include <cstddef>
#include <cstdint>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace recore::ad {

using Shape = std::vector<std::int64_t>;

std::int64_t numel(const Shape& shape);

// 64-byte aligned storage. Vectorized kernels peel a different number of
// leading scalars depending on the start address, which changes summation
// order; a fixed alignment keeps results identical from run to run.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) { ::operator delete(p, kAlign); }

  template <typename U>
  friend bool operator==(const AlignedAllocator&, const AlignedAllocator<U>&) {
    return true;
  }
};

template <typename T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;
std::string to_string(const Shape& shape);

// Dense row-major array. A rank-0 shape {} holds one scalar.
template <typename T>
class BasicArray {
 public:
  using value_type = T;

  BasicArray() = default;
  explicit BasicArray(Shape shape, T fill = T(0));
  BasicArray(Shape shape, std::vector<T> data);

  static BasicArray scalar(T v) { return BasicArray(Shape{}, std::vector<T>{v}); }

  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  // Negative axes count from the back.
  std::int64_t dim(int axis) const;
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  T* ptr() { return data_.data(); }
  const T* ptr() const { return data_.data(); }

  T& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  const T& operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

  // Value of a single-element array.
  T item() const;

  void fill(T v);
  bool all_finite() const;
  // Same data under a different shape with the same element count.
  BasicArray reshaped(Shape shape) const;

  template <typename U>
  BasicArray<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return BasicArray<U>(shape_, std::move(out));
  }

  friend bool operator==(const BasicArray& a, const BasicArray& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  AlignedVector<T> data_;
};

using Array = BasicArray<float>;
using Array64 = BasicArray<double>;

extern template class BasicArray<float>;
extern template class BasicArray<double>;

}  // namespace recore::ad
