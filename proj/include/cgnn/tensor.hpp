#pragma once

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace cgnn {

// Row-major 2-D array. Vectors are rows x 1 or 1 x cols as convenient.
template <class T>
struct Tensor {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> v;

  Tensor() = default;
  Tensor(std::size_t r, std::size_t c, T fill = T(0)) : rows(r), cols(c), v(r * c, fill) {}
  Tensor(std::size_t r, std::size_t c, std::vector<T> data) : rows(r), cols(c), v(std::move(data)) {
    if (v.size() != rows * cols) throw std::invalid_argument("tensor: data size mismatch");
  }

  std::size_t size() const { return v.size(); }
  T& at(std::size_t i, std::size_t j) { return v[i * cols + j]; }
  const T& at(std::size_t i, std::size_t j) const { return v[i * cols + j]; }
  T* row(std::size_t i) { return v.data() + i * cols; }
  const T* row(std::size_t i) const { return v.data() + i * cols; }

  void fill(T x) { std::fill(v.begin(), v.end(), x); }

  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }

  template <class U>
  Tensor<U> cast() const {
    Tensor<U> out(rows, cols);
    for (std::size_t i = 0; i < v.size(); ++i) out.v[i] = static_cast<U>(v[i]);
    return out;
  }
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace cgnn
