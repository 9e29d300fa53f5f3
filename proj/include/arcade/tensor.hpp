// Dense row-major tensor of doubles. Rank 0..3 is what the rest of the
// code base actually uses (scalars, vectors, matrices, [N,C,L] feature maps).
#pragma once

#include <algorithm>
#include <cstdint>
#include <initializer_list>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace arcade {

namespace detail {
// Allocator with two jobs: (1) skip default-initialization so freshly
// allocated buffers that are fully overwritten do not pay for a memset,
// and (2) hand out 64-byte-aligned storage so vectorized kernels take the
// same code path for every buffer. Reductions would otherwise accumulate
// in an order that depends on where the heap happened to place the data,
// breaking bit-exact reproducibility between runs.
template <typename T>
struct NoInitAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  NoInitAllocator() = default;
  template <typename U>
  constexpr NoInitAllocator(const NoInitAllocator<U>&) noexcept {}
  T* allocate(std::size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), kAlign));
  }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }
  template <typename U>
  void construct(U*) noexcept {}
  template <typename U, typename... Args>
  void construct(U* p, Args&&... args) {
    ::new (static_cast<void*>(p)) U(std::forward<Args>(args)...);
  }
  bool operator==(const NoInitAllocator&) const { return true; }
  bool operator!=(const NoInitAllocator&) const { return false; }
};
}  // namespace detail

using DoubleVec = std::vector<double, detail::NoInitAllocator<double>>;

class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<std::int64_t> shape)
      : shape_(std::move(shape)), data_(checked_size(shape_)) {
    std::fill(data_.begin(), data_.end(), 0.0);
  }

  Tensor(std::vector<std::int64_t> shape, DoubleVec data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (static_cast<std::int64_t>(data_.size()) != checked_numel(shape_))
      throw std::invalid_argument("Tensor: data size does not match shape");
  }

  Tensor(std::vector<std::int64_t> shape, const std::vector<double>& data)
      : shape_(std::move(shape)), data_(data.begin(), data.end()) {
    if (static_cast<std::int64_t>(data_.size()) != checked_numel(shape_))
      throw std::invalid_argument("Tensor: data size does not match shape");
  }

  Tensor(std::vector<std::int64_t> shape, std::initializer_list<double> data)
      : shape_(std::move(shape)), data_(data.begin(), data.end()) {
    if (static_cast<std::int64_t>(data_.size()) != checked_numel(shape_))
      throw std::invalid_argument("Tensor: data size does not match shape");
  }

  static Tensor scalar(double v) { return Tensor({}, {v}); }

  // Allocates without clearing; every element must be written before use.
  static Tensor uninit(std::vector<std::int64_t> shape) {
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_.resize(checked_size(t.shape_));
    return t;
  }

  static Tensor zeros(std::vector<std::int64_t> shape) {
    return Tensor(std::move(shape));
  }

  static Tensor full(std::vector<std::int64_t> shape, double v) {
    Tensor t = uninit(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), v);
    return t;
  }

  const std::vector<std::int64_t>& shape() const { return shape_; }
  std::int64_t rank() const { return static_cast<std::int64_t>(shape_.size()); }
  std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }
  std::int64_t dim(std::size_t i) const { return shape_.at(i); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  DoubleVec& vec() { return data_; }
  const DoubleVec& vec() const { return data_; }

  double& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  double operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

  // Scalar access for rank-0 tensors.
  double item() const {
    if (numel() != 1) throw std::logic_error("Tensor::item on non-scalar");
    return data_[0];
  }

  double& at(std::int64_t i, std::int64_t j) {
    return data_[static_cast<std::size_t>(i * shape_[1] + j)];
  }
  double at(std::int64_t i, std::int64_t j) const {
    return data_[static_cast<std::size_t>(i * shape_[1] + j)];
  }
  double& at(std::int64_t i, std::int64_t j, std::int64_t k) {
    return data_[static_cast<std::size_t>((i * shape_[1] + j) * shape_[2] + k)];
  }
  double at(std::int64_t i, std::int64_t j, std::int64_t k) const {
    return data_[static_cast<std::size_t>((i * shape_[1] + j) * shape_[2] + k)];
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  Tensor reshaped(std::vector<std::int64_t> new_shape) const {
    Tensor t(std::move(new_shape), data_);
    return t;
  }

  std::string shape_str() const {
    std::string s = "[";
    for (std::size_t i = 0; i < shape_.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(shape_[i]);
    }
    return s + "]";
  }

 private:
  static std::int64_t checked_numel(const std::vector<std::int64_t>& shape) {
    std::int64_t n = 1;
    for (auto d : shape) {
      if (d < 0) throw std::invalid_argument("Tensor: negative dimension");
      n *= d;
    }
    return n;
  }
  static std::size_t checked_size(const std::vector<std::int64_t>& shape) {
    return static_cast<std::size_t>(checked_numel(shape));
  }

  std::vector<std::int64_t> shape_;
  DoubleVec data_;
};

}  // namespace arcade
