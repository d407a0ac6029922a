#pragma once

#include <algorithm>
#include <cassert>
#include <cstddef>
#include <span>
#include <type_traits>
#include <vector>

namespace eostb {

// Row-major dense matrix of doubles. Owns its storage.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0)
      : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, fill) {}

  double& operator()(int r, int c) {
    assert(r >= 0 && r < rows && c >= 0 && c < cols);
    return data[static_cast<std::size_t>(r) * cols + c];
  }
  double operator()(int r, int c) const {
    assert(r >= 0 && r < rows && c >= 0 && c < cols);
    return data[static_cast<std::size_t>(r) * cols + c];
  }

  std::span<double> row(int r) {
    return {data.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)};
  }
  std::span<const double> row(int r) const {
    return {data.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)};
  }

  void zero() { std::fill(data.begin(), data.end(), 0.0); }
  bool operator==(const Matrix&) const = default;
};

// Non-owning view of a row-major block inside a larger buffer.
template <typename T>
struct MatRef {
  T* ptr = nullptr;
  int rows = 0;
  int cols = 0;

  MatRef() = default;
  MatRef(T* p, int r, int c) : ptr(p), rows(r), cols(c) {}
  template <typename U>
    requires std::is_same_v<const U, T>
  MatRef(const MatRef<U>& o) : ptr(o.ptr), rows(o.rows), cols(o.cols) {}

  T& operator()(int r, int c) const { return ptr[static_cast<std::size_t>(r) * cols + c]; }
  std::span<T> row(int r) const { return {ptr + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)}; }
  std::size_t size() const { return static_cast<std::size_t>(rows) * cols; }
};

using MatView = MatRef<double>;
using ConstMatView = MatRef<const double>;

inline MatView view(Matrix& m) { return {m.data.data(), m.rows, m.cols}; }
inline ConstMatView view(const Matrix& m) { return {m.data.data(), m.rows, m.cols}; }

}  // namespace eostb
