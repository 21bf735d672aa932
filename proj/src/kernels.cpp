#include "cgnn/kernels.hpp"

#include <omp.h>

#include <atomic>
#include <cstdlib>

namespace cgnn::kernels {

namespace {
std::atomic<bool> g_parallel{false};
}

void set_parallel(bool on) { g_parallel.store(on, std::memory_order_relaxed); }
bool parallel_enabled() { return g_parallel.load(std::memory_order_relaxed); }

void configure_threads_from_env() {
  if (const char* s = std::getenv("CGNN_THREADS")) {
    const int n = std::atoi(s);
    if (n > 0) omp_set_num_threads(n);
  }
}

namespace omp {

template <class T>
void matmul_nn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n,
               bool accumulate) {
#pragma omp parallel for schedule(static)
  for (long long ii = 0; ii < static_cast<long long>(m); ++ii) {
    const std::size_t i = static_cast<std::size_t>(ii);
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

template <class T>
void matmul_nt(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n,
               bool accumulate) {
#pragma omp parallel for schedule(static)
  for (long long ii = 0; ii < static_cast<long long>(m); ++ii) {
    const std::size_t i = static_cast<std::size_t>(ii);
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

template <class T>
void matmul_tn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n,
               bool accumulate) {
  // parallel over output rows i (columns of A); inner order matches serial
#pragma omp parallel for schedule(static)
  for (long long ii = 0; ii < static_cast<long long>(m); ++ii) {
    const std::size_t i = static_cast<std::size_t>(ii);
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

template <class T>
void spmm(const std::size_t* row_offsets, const std::size_t* col_indices, const double* values,
          const T* x, T* y, std::size_t n, std::size_t d, bool accumulate) {
#pragma omp parallel for schedule(static)
  for (long long ii = 0; ii < static_cast<long long>(n); ++ii) {
    const std::size_t i = static_cast<std::size_t>(ii);
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

template void matmul_nn<float>(const float*, const float*, float*, std::size_t, std::size_t,
                               std::size_t, bool);
template void matmul_nn<double>(const double*, const double*, double*, std::size_t, std::size_t,
                                std::size_t, bool);
template void matmul_nt<float>(const float*, const float*, float*, std::size_t, std::size_t,
                               std::size_t, bool);
template void matmul_nt<double>(const double*, const double*, double*, std::size_t, std::size_t,
                                std::size_t, bool);
template void matmul_tn<float>(const float*, const float*, float*, std::size_t, std::size_t,
                               std::size_t, bool);
template void matmul_tn<double>(const double*, const double*, double*, std::size_t, std::size_t,
                                std::size_t, bool);
template void spmm<float>(const std::size_t*, const std::size_t*, const double*, const float*,
                          float*, std::size_t, std::size_t, bool);
template void spmm<double>(const std::size_t*, const std::size_t*, const double*, const double*,
                           double*, std::size_t, std::size_t, bool);

}  // namespace omp

}  // namespace cgnn::kernels
