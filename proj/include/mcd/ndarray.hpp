#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "mcd/error.hpp"

namespace mcd {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_product(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ')';
  return os.str();
}

// Dense C-order array with owned storage. Indexing via operator() takes one
// index per axis; the last axis is contiguous.
template <class T>
class NdArray {
 public:
  using value_type = T;

  NdArray() = default;
  explicit NdArray(Shape shape, T fill = T{})
      : shape_(std::move(shape)), data_(shape_product(shape_), fill) {
    compute_strides();
  }
  NdArray(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_product(shape_))
      throw DataError("NdArray: data length " + std::to_string(data_.size()) +
                      " does not match shape " + shape_string(shape_));
    compute_strides();
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }
  const std::vector<std::size_t>& strides() const noexcept { return strides_; }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  std::vector<T>& storage() noexcept { return data_; }
  const std::vector<T>& storage() const noexcept { return data_; }

  T& operator[](std::size_t flat) noexcept { return data_[flat]; }
  const T& operator[](std::size_t flat) const noexcept { return data_[flat]; }

  template <class... I>
  T& operator()(I... idx) noexcept {
    return data_[offset(idx...)];
  }
  template <class... I>
  const T& operator()(I... idx) const noexcept {
    return data_[offset(idx...)];
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  // Reinterpret with a new shape of the same element count.
  NdArray reshaped(Shape shape) const {
    return NdArray(std::move(shape), data_);
  }

  bool operator==(const NdArray& other) const = default;

 private:
  template <class... I>
  std::size_t offset(I... idx) const noexcept {
    std::size_t off = 0;
    std::size_t axis = 0;
    ((off += static_cast<std::size_t>(idx) * strides_[axis++]), ...);
    return off;
  }

  void compute_strides() {
    strides_.assign(shape_.size(), 1);
    for (std::size_t i = shape_.size(); i-- > 1;) strides_[i - 1] = strides_[i] * shape_[i];
  }

  Shape shape_;
  std::vector<std::size_t> strides_;
  std::vector<T> data_;
};

// 2D images and n-d stacks in working precision.
using Image = NdArray<double>;
using Array = NdArray<double>;

inline Image make_image(std::size_t rows, std::size_t cols, double fill = 0.0) {
  return Image({rows, cols}, fill);
}

inline void require_rank(const Shape& shape, std::size_t rank, const char* what) {
  if (shape.size() != rank)
    throw DataError(std::string(what) + ": expected rank " + std::to_string(rank) + ", got shape " +
                    shape_string(shape));
}

inline void require_same_shape(const Shape& a, const Shape& b, const char* what) {
  if (a != b)
    throw DataError(std::string(what) + ": shape mismatch " + shape_string(a) + " vs " +
                    shape_string(b));
}

// Copy of the 2D plane at the given leading indices, e.g. plane(stack, {i, j})
// of a rank-4 (i, j, h, w) array.
template <class T>
NdArray<T> plane(const NdArray<T>& a, std::initializer_list<std::size_t> lead) {
  if (a.rank() != lead.size() + 2) throw DataError("plane: rank mismatch " + shape_string(a.shape()));
  std::size_t off = 0, axis = 0;
  for (auto i : lead) off += i * a.strides()[axis++];
  const std::size_t h = a.dim(a.rank() - 2), w = a.dim(a.rank() - 1);
  NdArray<T> out({h, w});
  std::copy_n(a.data() + off, h * w, out.data());
  return out;
}

template <class T>
void set_plane(NdArray<T>& a, std::initializer_list<std::size_t> lead, const NdArray<T>& img) {
  if (a.rank() != lead.size() + 2) throw DataError("set_plane: rank mismatch");
  const std::size_t h = a.dim(a.rank() - 2), w = a.dim(a.rank() - 1);
  if (img.rank() != 2 || img.dim(0) != h || img.dim(1) != w)
    throw DataError("set_plane: plane shape mismatch " + shape_string(img.shape()));
  std::size_t off = 0, axis = 0;
  for (auto i : lead) off += i * a.strides()[axis++];
  std::copy_n(img.data(), h * w, a.data() + off);
}

}  // namespace mcd
