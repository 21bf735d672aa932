#pragma once

#include <cstddef>

namespace cgnn::kernels {

// Parallel (OpenMP) kernels are the "fast" mode; the serial versions are the
// reference used in deterministic mode and in tests. All kernels parallelize
// over independent output rows with a fixed inner accumulation order, so both
// modes agree to float rounding (tested at 1e-5 relative).
void set_parallel(bool on);
bool parallel_enabled();

// Reads CGNN_THREADS and caps the OpenMP thread count. Called once by the CLI.
void configure_threads_from_env();

namespace serial {

// C = A(m x k) * B(k x n), or C += if accumulate
template <class T>
void matmul_nn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n,
               bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    T* ci = c + i * n;
    if (!accumulate)
      for (std::size_t j = 0; j < n; ++j) ci[j] = T(0);
    const T* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const T aip = ai[p];
      const T* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

// C = A(m x k) * B(n x k)^T
template <class T>
void matmul_nt(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n,
               bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* ai = a + i * k;
    T* ci = c + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const T* bj = b + j * k;
      T acc = T(0);
      for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
      if (accumulate)
        ci[j] += acc;
      else
        ci[j] = acc;
    }
  }
}

// C = A(k x m)^T * B(k x n); output m x n
template <class T>
void matmul_tn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n,
               bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    T* ci = c + i * n;
    if (!accumulate)
      for (std::size_t j = 0; j < n; ++j) ci[j] = T(0);
    for (std::size_t p = 0; p < k; ++p) {
      const T api = a[p * m + i];
      const T* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += api * bp[j];
    }
  }
}

// y = S * x where S is CSR with per-entry weights; y, x are (n x d)
template <class T>
void spmm(const std::size_t* row_offsets, const std::size_t* col_indices, const double* values,
          const T* x, T* y, std::size_t n, std::size_t d, bool accumulate) {
  for (std::size_t i = 0; i < n; ++i) {
    T* yi = y + i * d;
    if (!accumulate)
      for (std::size_t j = 0; j < d; ++j) yi[j] = T(0);
    for (std::size_t e = row_offsets[i]; e < row_offsets[i + 1]; ++e) {
      const T w = static_cast<T>(values[e]);
      const T* xj = x + col_indices[e] * d;
      for (std::size_t j = 0; j < d; ++j) yi[j] += w * xj[j];
    }
  }
}

}  // namespace serial

namespace omp {

template <class T>
void matmul_nn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n,
               bool accumulate);
template <class T>
void matmul_nt(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n,
               bool accumulate);
template <class T>
void matmul_tn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n,
               bool accumulate);
template <class T>
void spmm(const std::size_t* row_offsets, const std::size_t* col_indices, const double* values,
          const T* x, T* y, std::size_t n, std::size_t d, bool accumulate);

}  // namespace omp

// Dispatchers honouring the current mode.
template <class T>
void matmul_nn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n,
               bool accumulate = false) {
  if (parallel_enabled())
    omp::matmul_nn(a, b, c, m, k, n, accumulate);
  else
    serial::matmul_nn(a, b, c, m, k, n, accumulate);
}

template <class T>
void matmul_nt(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n,
               bool accumulate = false) {
  if (parallel_enabled())
    omp::matmul_nt(a, b, c, m, k, n, accumulate);
  else
    serial::matmul_nt(a, b, c, m, k, n, accumulate);
}

template <class T>
void matmul_tn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n,
               bool accumulate = false) {
  if (parallel_enabled())
    omp::matmul_tn(a, b, c, m, k, n, accumulate);
  else
    serial::matmul_tn(a, b, c, m, k, n, accumulate);
}

template <class T>
void spmm(const std::size_t* row_offsets, const std::size_t* col_indices, const double* values,
          const T* x, T* y, std::size_t n, std::size_t d, bool accumulate = false) {
  if (parallel_enabled())
    omp::spmm(row_offsets, col_indices, values, x, y, n, d, accumulate);
  else
    serial::spmm(row_offsets, col_indices, values, x, y, n, d, accumulate);
}

}  // namespace cgnn::kernels
