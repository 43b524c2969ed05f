#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <initializer_list>
#include <new>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "dalmp/error.hpp"

namespace dalmp {

/// Dense shape of rank 1..3.
class Shape {
 public:
  static constexpr std::size_t max_rank = 3;

  Shape() = default;
  Shape(std::initializer_list<std::size_t> dims) {
    if (dims.size() == 0 || dims.size() > max_rank) {
      throw Error(ErrorCode::shape_mismatch, "rank must be 1..3");
    }
    for (std::size_t d : dims) {
      if (d == 0) throw Error(ErrorCode::shape_mismatch, "dimensions must be positive");
      dims_[rank_++] = d;
    }
  }
  static Shape of(std::span<const std::size_t> dims) {
    Shape s;
    if (dims.empty() || dims.size() > max_rank) {
      throw Error(ErrorCode::shape_mismatch, "rank must be 1..3");
    }
    for (std::size_t d : dims) {
      if (d == 0) throw Error(ErrorCode::shape_mismatch, "dimensions must be positive");
      s.dims_[s.rank_++] = d;
    }
    return s;
  }

  std::size_t rank() const { return rank_; }
  std::size_t operator[](std::size_t axis) const { return dims_[axis]; }
  std::size_t back() const { return dims_[rank_ - 1]; }
  std::size_t size() const {
    std::size_t n = rank_ == 0 ? 0 : 1;
    for (std::size_t i = 0; i < rank_; ++i) n *= dims_[i];
    return n;
  }
  std::span<const std::size_t> dims() const { return {dims_.data(), rank_}; }

  bool operator==(const Shape& other) const {
    return rank_ == other.rank_ && std::equal(dims_.begin(), dims_.begin() + rank_, other.dims_.begin());
  }

  std::string str() const {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < rank_; ++i) os << (i ? "x" : "") << dims_[i];
    os << ']';
    return os.str();
  }

 private:
  std::array<std::size_t, max_rank> dims_{};
  std::size_t rank_ = 0;
};

namespace detail {

// Fixed 64-byte alignment keeps Eigen's vectorized reductions independent of
// heap addresses.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t alignment{64};

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), alignment)); }
  void deallocate(T* p, std::size_t) { ::operator delete(p, alignment); }

  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const {
    return true;
  }
};

}  // namespace detail

/// Row-major float64 tensor.
class Tensor {
 public:
  using Storage = std::vector<double, detail::AlignedAllocator<double>>;

  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0) : shape_(shape), data_(shape.size(), fill) {}
  Tensor(Shape shape, const std::vector<double>& data) : Tensor(shape, Storage(data.begin(), data.end())) {}
  Tensor(Shape shape, std::initializer_list<double> data) : Tensor(shape, Storage(data)) {}
  Tensor(Shape shape, Storage data) : shape_(shape), data_(std::move(data)) {
    if (data_.size() != shape_.size()) {
      throw Error(ErrorCode::shape_mismatch,
                  "tensor " + shape_.str() + " needs " + std::to_string(shape_.size()) + " values, got " +
                      std::to_string(data_.size()));
    }
  }

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::vector<double> values() const { return {data_.begin(), data_.end()}; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  double at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
  double& at(std::size_t i, std::size_t j, std::size_t k) { return data_[(i * shape_[1] + j) * shape_[2] + k]; }
  double at(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  Tensor reshaped(Shape shape) const {
    if (shape.size() != shape_.size()) {
      throw Error(ErrorCode::shape_mismatch, "reshape " + shape_.str() + " -> " + shape.str());
    }
    return Tensor(shape, data_);
  }

  bool operator==(const Tensor& other) const = default;

 private:
  Shape shape_;
  Storage data_;
};

}  // namespace dalmp
