#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pulsebench/error.hpp"

namespace pb {

// 64-byte aligned storage. Vectorized reductions peel differently for
// differently aligned pointers, so run-to-run bitwise reproducibility
// requires every tensor buffer to land on the same alignment.
template <class S>
struct TensorAllocator {
  using value_type = S;
  static constexpr std::size_t kAlign = 64;

  TensorAllocator() = default;
  template <class U>
  TensorAllocator(const TensorAllocator<U>&) noexcept {}

  S* allocate(std::size_t n) {
    return static_cast<S*>(::operator new(n * sizeof(S), std::align_val_t{kAlign}));
  }
  void deallocate(S* p, std::size_t) noexcept {
    ::operator delete(p, std::align_val_t{kAlign});
  }
  template <class U>
  bool operator==(const TensorAllocator<U>&) const noexcept {
    return true;
  }
};

template <class S>
using TensorVec = std::vector<S, TensorAllocator<S>>;

using Shape = std::vector<std::int64_t>;

inline std::int64_t shape_numel(const Shape& s) {
  std::int64_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

inline bool shape_eq(const Shape& a, const Shape& b) { return a == b; }

// Dense row-major tensor. Float32 is the working precision; the double
// instantiation exists for gradient checking.
template <class S>
struct TensorT {
  Shape shape;
  TensorVec<S> data;

  using MatRM = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

  TensorT() = default;
  explicit TensorT(Shape sh, S fill = S(0)) : shape(std::move(sh)) {
    for (auto d : shape)
      require(d >= 1, ErrorKind::kShape, "tensor dims must be >= 1");
    data.assign(static_cast<std::size_t>(shape_numel(shape)), fill);
  }
  TensorT(Shape sh, TensorVec<S> values) : shape(std::move(sh)), data(std::move(values)) {
    for (auto d : shape)
      require(d >= 1, ErrorKind::kShape, "tensor dims must be >= 1");
    require(static_cast<std::int64_t>(data.size()) == shape_numel(shape),
            ErrorKind::kShape, "tensor data size does not match shape");
  }

  std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
  int rank() const { return static_cast<int>(shape.size()); }
  std::int64_t dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

  S& operator()(std::int64_t i) { return data[static_cast<std::size_t>(i)]; }
  S operator()(std::int64_t i) const { return data[static_cast<std::size_t>(i)]; }
  S& operator()(std::int64_t i, std::int64_t j) {
    return data[static_cast<std::size_t>(i * shape[1] + j)];
  }
  S operator()(std::int64_t i, std::int64_t j) const {
    return data[static_cast<std::size_t>(i * shape[1] + j)];
  }
  S& operator()(std::int64_t i, std::int64_t j, std::int64_t k) {
    return data[static_cast<std::size_t>((i * shape[1] + j) * shape[2] + k)];
  }
  S operator()(std::int64_t i, std::int64_t j, std::int64_t k) const {
    return data[static_cast<std::size_t>((i * shape[1] + j) * shape[2] + k)];
  }
  S& operator()(std::int64_t i, std::int64_t j, std::int64_t k, std::int64_t l) {
    return data[static_cast<std::size_t>(((i * shape[1] + j) * shape[2] + k) * shape[3] + l)];
  }
  S operator()(std::int64_t i, std::int64_t j, std::int64_t k, std::int64_t l) const {
    return data[static_cast<std::size_t>(((i * shape[1] + j) * shape[2] + k) * shape[3] + l)];
  }
  S& operator()(std::int64_t i, std::int64_t j, std::int64_t k, std::int64_t l, std::int64_t m) {
    return data[static_cast<std::size_t>(
        (((i * shape[1] + j) * shape[2] + k) * shape[3] + l) * shape[4] + m)];
  }
  S operator()(std::int64_t i, std::int64_t j, std::int64_t k, std::int64_t l, std::int64_t m) const {
    return data[static_cast<std::size_t>(
        (((i * shape[1] + j) * shape[2] + k) * shape[3] + l) * shape[4] + m)];
  }

  // View of the flat buffer as a rows x cols row-major matrix.
  Eigen::Map<MatRM> mat(std::int64_t rows, std::int64_t cols) {
    require(rows * cols == numel(), ErrorKind::kShape, "matrix view size mismatch");
    return Eigen::Map<MatRM>(data.data(), rows, cols);
  }
  Eigen::Map<const MatRM> mat(std::int64_t rows, std::int64_t cols) const {
    require(rows * cols == numel(), ErrorKind::kShape, "matrix view size mismatch");
    return Eigen::Map<const MatRM>(data.data(), rows, cols);
  }
  Eigen::Map<Vec> vec() { return Eigen::Map<Vec>(data.data(), numel()); }
  Eigen::Map<const Vec> vec() const { return Eigen::Map<const Vec>(data.data(), numel()); }

  void fill(S v) { std::fill(data.begin(), data.end(), v); }
};

using Tensor = TensorT<float>;
using Tensor64 = TensorT<double>;

template <class To, class From>
TensorT<To> tensor_cast(const TensorT<From>& t) {
  TensorT<To> out(t.shape);
  for (std::size_t i = 0; i < t.data.size(); ++i)
    out.data[i] = static_cast<To>(t.data[i]);
  return out;
}

}  // namespace pb
