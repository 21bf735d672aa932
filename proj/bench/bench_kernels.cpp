// Compares the serial reference kernels against the OpenMP versions: checks
// agreement to 1e-5 relative and reports throughput for both.

#include <omp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <vector>

#include "cgnn/graph.hpp"
#include "cgnn/kernels.hpp"
#include "cgnn/rng.hpp"

using namespace cgnn;

namespace {

double now() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

double max_rel_diff(const std::vector<float>& a, const std::vector<float>& b) {
  double worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::fabs((double)a[i]), std::fabs((double)b[i]), 1e-6});
    worst = std::max(worst, std::fabs((double)a[i] - b[i]) / denom);
  }
  return worst;
}

template <class F>
double time_best_of(F&& f, int reps = 5) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const double t0 = now();
    f();
    best = std::min(best, now() - t0);
  }
  return best;
}

}  // namespace

int main() {
  kernels::configure_threads_from_env();
  std::printf("threads: %d\n", omp_get_max_threads());

  // dense matmul
  {
    const std::size_t m = 2048, k = 256, n = 256;
    std::vector<float> a(m * k), b(k * n), c_s(m * n), c_p(m * n);
    Rng rng(42);
    for (auto& v : a) v = (float)rng.next_gaussian();
    for (auto& v : b) v = (float)rng.next_gaussian();

    const double flops = 2.0 * m * k * n;
    const double ts = time_best_of(
        [&] { kernels::serial::matmul_nn(a.data(), b.data(), c_s.data(), m, k, n, false); });
    const double tp = time_best_of(
        [&] { kernels::omp::matmul_nn(a.data(), b.data(), c_p.data(), m, k, n, false); });
    std::printf("matmul_nn %zux%zux%zu  serial %.1f ms (%.2f GF/s)  omp %.1f ms (%.2f GF/s)  "
                "speedup %.2fx  max rel diff %.2e\n",
                m, k, n, ts * 1e3, flops / ts * 1e-9, tp * 1e3, flops / tp * 1e-9, ts / tp,
                max_rel_diff(c_s, c_p));
  }

  // spmm on an SBM-sized sparse graph
  {
    const auto ds = generate_sbm(10, 1000, 0.01, 0.001, 16, 1.0, 3);
    Rng rng(7);
    View view = drop_edges(ds.graph, 0.0, rng);
    const std::size_t n = ds.graph.num_nodes, d = 128;
    std::vector<float> x(n * d), y_s(n * d), y_p(n * d);
    for (auto& v : x) v = (float)rng.next_gaussian();

    const double flops = 2.0 * view.graph.col_indices.size() * d;
    const double ts = time_best_of([&] {
      kernels::serial::spmm(view.graph.row_offsets.data(), view.graph.col_indices.data(),
                            view.norm_values.data(), x.data(), y_s.data(), n, d, false);
    });
    const double tp = time_best_of([&] {
      kernels::omp::spmm(view.graph.row_offsets.data(), view.graph.col_indices.data(),
                         view.norm_values.data(), x.data(), y_p.data(), n, d, false);
    });
    std::printf("spmm n=%zu nnz=%zu d=%zu  serial %.1f ms (%.2f GF/s)  omp %.1f ms (%.2f GF/s)  "
                "speedup %.2fx  max rel diff %.2e\n",
                n, view.graph.col_indices.size(), d, ts * 1e3, flops / ts * 1e-9, tp * 1e3,
                flops / tp * 1e-9, ts / tp, max_rel_diff(y_s, y_p));
  }
  return 0;
}
