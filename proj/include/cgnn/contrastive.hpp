#pragma once

#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

#include "cgnn/errors.hpp"
#include "cgnn/rng.hpp"
#include "cgnn/tape.hpp"

namespace cgnn {

struct ContrastiveConfig {
  double tau = 0.1;
  std::size_t K = 1024;
  double rho = 0.3;

  void validate(std::size_t num_nodes) const {
    require(tau > 0, "tau must be positive");
    require(K >= 1 && K <= num_nodes - 1, "K must be in [1, N-1]");
    require(rho >= 0 && rho < 1, "rho must be in [0,1)");
  }
};

struct NegativeSample {
  std::size_t anchor = 0;
  std::vector<std::size_t> indices;  // K distinct ids, anchor excluded
};

// Per-view store of detached unit-norm embeddings used as NCE negatives.
struct EmbeddingBank {
  Tensor<float> view1;
  Tensor<float> view2;
  bool initialized = false;
};

void bank_update(EmbeddingBank& bank, const Tensor<float>& z1_detached,
                 const Tensor<float>& z2_detached);

// exp(dot / tau) for unit vectors
template <class T>
T score(const T* z_a, const T* z_b, std::size_t d, T tau) {
  require(tau > T(0), "score: tau must be positive");
  T dot = T(0);
  for (std::size_t i = 0; i < d; ++i) dot += z_a[i] * z_b[i];
  return std::exp(dot / tau);
}

// p(c=1 | anchor, candidate) = h / (h + K/N)
inline double nce_posterior(double h, std::size_t K, std::size_t N) {
  return h / (h + static_cast<double>(K) / static_cast<double>(N));
}

inline double mi_lower_bound(double loss, std::size_t K) {
  return std::log(static_cast<double>(K)) - loss;
}

// K distinct uniform draws from {0..N-1} \ {anchor}, sorted ascending.
NegativeSample sample_negatives(std::size_t anchor, std::size_t N, std::size_t K, Rng& rng);

// One negative set per anchor, each from its own substream so the result does
// not depend on anchor iteration order.
std::vector<NegativeSample> sample_all_negatives(std::size_t N, std::size_t K, std::uint64_t seed,
                                                 std::uint64_t iteration);

// |K_set intersect M_set| / |K_set|
double sampling_risk(const std::vector<std::size_t>& sampled_set,
                     const std::set<std::size_t>& similar_set);

std::set<std::size_t> similar_set_by_label(const std::vector<int>& labels, std::size_t anchor);
std::set<std::size_t> similar_set_by_cosine(const Tensor<float>& embeddings, std::size_t anchor,
                                            double threshold);

// --- losses (fused tape ops) --------------------------------------------

// Softmax contrastive loss L = L1 + L2 over live unit-norm embeddings z1, z2
// (N x d tape nodes). Per anchor i the candidates are the positive z2[i]
// (index 0) plus its K sampled negatives from z2; L2 mirrors with views
// swapped using the same index sets.
template <class T>
typename Tape<T>::Id softmax_contrastive_loss(Tape<T>& tape, typename Tape<T>::Id z1,
                                              typename Tape<T>::Id z2,
                                              const std::vector<NegativeSample>& negatives,
                                              T tau) {
  const auto& Z1 = tape.val(z1);
  const auto& Z2 = tape.val(z2);
  require(Z1.same_shape(Z2), "softmax loss: embedding shape mismatch");
  const std::size_t n = Z1.rows, d = Z1.cols;
  require(negatives.size() == n, "softmax loss: one negative set per anchor required");
  require(tau > T(0), "softmax loss: tau must be positive");
  for (const auto& ns : negatives)
    require(ns.indices.size() < n, "softmax loss: K must be < N");

  // probs[dir][i] = softmax over (positive, negatives) scores for anchor i
  std::vector<std::vector<std::vector<T>>> probs(2);
  T loss = T(0);
  for (int dir = 0; dir < 2; ++dir) {
    const Tensor<T>& A = dir == 0 ? Z1 : Z2;
    const Tensor<T>& B = dir == 0 ? Z2 : Z1;
    probs[dir].resize(n);
    T acc = T(0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t k = negatives[i].indices.size();
      std::vector<T> s(k + 1);
      s[0] = row_dot(A, i, B, i) / tau;
      for (std::size_t j = 0; j < k; ++j)
        s[j + 1] = row_dot(A, i, B, negatives[i].indices[j]) / tau;
      T mx = s[0];
      for (T v : s) mx = std::max(mx, v);
      T denom = T(0);
      for (auto& v : s) {
        v = std::exp(v - mx);
        denom += v;
      }
      for (auto& v : s) v /= denom;
      acc += -std::log(s[0]);
      probs[dir][i] = std::move(s);
    }
    loss += acc / static_cast<T>(n);
  }

  return tape.custom(Tensor<T>(1, 1, {loss}), tape.requires_grad(z1) || tape.requires_grad(z2),
                     [z1, z2, negatives, tau, probs](Tape<T>& t, typename Tape<T>::Id out) {
                       softmax_loss_backward(t, z1, z2, negatives, tau, probs, t.grad(out).v[0]);
                     });
}

// NCE loss L_NCE = L1 + L2. Positive pair uses both live views; negatives come
// from the (constant) banks and receive no gradient.
template <class T>
typename Tape<T>::Id nce_loss(Tape<T>& tape, typename Tape<T>::Id z1, typename Tape<T>::Id z2,
                              const Tensor<T>& bank1, const Tensor<T>& bank2,
                              const std::vector<NegativeSample>& negatives, T tau, std::size_t K,
                              std::size_t N_noise, bool bank_ready = true) {
  if (!bank_ready) throw StateError("nce_loss: embedding bank not initialized");
  const auto& Z1 = tape.val(z1);
  const auto& Z2 = tape.val(z2);
  require(Z1.same_shape(Z2), "nce loss: embedding shape mismatch");
  require(bank1.same_shape(Z1) && bank2.same_shape(Z2), "nce loss: bank shape mismatch");
  const std::size_t n = Z1.rows;
  require(negatives.size() == n, "nce loss: one negative set per anchor required");
  require(tau > T(0), "nce loss: tau must be positive");

  const T noise = static_cast<T>(K) / static_cast<T>(N_noise);
  // posteriors needed by backward: pos[dir][i], neg[dir][i][j]
  std::vector<std::vector<T>> pos(2, std::vector<T>(n));
  std::vector<std::vector<std::vector<T>>> neg(2);
  T loss = T(0);
  for (int dir = 0; dir < 2; ++dir) {
    const Tensor<T>& A = dir == 0 ? Z1 : Z2;
    const Tensor<T>& B = dir == 0 ? Z2 : Z1;
    const Tensor<T>& bank = dir == 0 ? bank2 : bank1;
    neg[dir].resize(n);
    std::vector<T> terms(n);
#pragma omp parallel for schedule(static) if (kernels::parallel_enabled())
    for (long long ii = 0; ii < static_cast<long long>(n); ++ii) {
      const std::size_t i = static_cast<std::size_t>(ii);
      const T h = score(A.row(i), B.row(i), A.cols, tau);
      const T p = h / (h + noise);
      pos[dir][i] = p;
      T term = std::log(p);
      const std::size_t k = negatives[i].indices.size();
      neg[dir][i].resize(k);
      for (std::size_t j = 0; j < k; ++j) {
        const T hj = score(A.row(i), bank.row(negatives[i].indices[j]), A.cols, tau);
        const T pj = hj / (hj + noise);
        neg[dir][i][j] = pj;
        term += std::log(T(1) - pj);
      }
      terms[i] = term;
    }
    T acc = T(0);
    for (std::size_t i = 0; i < n; ++i) acc += terms[i];  // fixed-order reduction
    loss += -acc / static_cast<T>(n);
  }

  const Tensor<T> b1 = bank1, b2 = bank2;  // keep copies alive for backward
  return tape.custom(
      Tensor<T>(1, 1, {loss}), tape.requires_grad(z1) || tape.requires_grad(z2),
      [z1, z2, b1, b2, negatives, tau, pos, neg](Tape<T>& t, typename Tape<T>::Id out) {
        nce_loss_backward(t, z1, z2, b1, b2, negatives, tau, pos, neg, t.grad(out).v[0]);
      });
}

// --- helpers ------------------------------------------------------------

template <class T>
T row_dot(const Tensor<T>& a, std::size_t i, const Tensor<T>& b, std::size_t j) {
  T s = T(0);
  for (std::size_t c = 0; c < a.cols; ++c) s += a.at(i, c) * b.at(j, c);
  return s;
}

template <class T>
void softmax_loss_backward(Tape<T>& t, typename Tape<T>::Id z1, typename Tape<T>::Id z2,
                           const std::vector<NegativeSample>& negatives, T tau,
                           const std::vector<std::vector<std::vector<T>>>& probs, T upstream) {
  const std::size_t n = t.val(z1).rows, d = t.val(z1).cols;
  const T inv_n = upstream / static_cast<T>(n);
  for (int dir = 0; dir < 2; ++dir) {
    const typename Tape<T>::Id a = dir == 0 ? z1 : z2;
    const typename Tape<T>::Id b = dir == 0 ? z2 : z1;
    const Tensor<T>& A = t.val(a);
    const Tensor<T>& B = t.val(b);
    Tensor<T>& DA = t.grad_mut(a);
    Tensor<T>& DB = t.grad_mut(b);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& p = probs[dir][i];
      for (std::size_t k = 0; k < p.size(); ++k) {
        const std::size_t row_b = k == 0 ? i : negatives[i].indices[k - 1];
        const T ds = (p[k] - (k == 0 ? T(1) : T(0))) * inv_n / tau;
        for (std::size_t c = 0; c < d; ++c) {
          DA.at(i, c) += ds * B.at(row_b, c);
          DB.at(row_b, c) += ds * A.at(i, c);
        }
      }
    }
  }
}

template <class T>
void nce_loss_backward(Tape<T>& t, typename Tape<T>::Id z1, typename Tape<T>::Id z2,
                       const Tensor<T>& bank1, const Tensor<T>& bank2,
                       const std::vector<NegativeSample>& negatives, T tau,
                       const std::vector<std::vector<T>>& pos,
                       const std::vector<std::vector<std::vector<T>>>& neg, T upstream) {
  const std::size_t n = t.val(z1).rows, d = t.val(z1).cols;
  const T inv_n = upstream / static_cast<T>(n);
  for (int dir = 0; dir < 2; ++dir) {
    const typename Tape<T>::Id a = dir == 0 ? z1 : z2;
    const typename Tape<T>::Id b = dir == 0 ? z2 : z1;
    const Tensor<T>& bank = dir == 0 ? bank2 : bank1;
    const Tensor<T>& A = t.val(a);
    const Tensor<T>& B = t.val(b);
    Tensor<T>& DA = t.grad_mut(a);
    Tensor<T>& DB = t.grad_mut(b);
    // rows of DA/DB touched by anchor i are exactly row i: safe to parallelize
#pragma omp parallel for schedule(static) if (kernels::parallel_enabled())
    for (long long ii = 0; ii < static_cast<long long>(n); ++ii) {
      const std::size_t i = static_cast<std::size_t>(ii);
      // d(-log P_pos)/d dot = -(1-P)/tau, applied to both live rows
      const T dpos = -(T(1) - pos[dir][i]) * inv_n / tau;
      for (std::size_t c = 0; c < d; ++c) {
        DA.at(i, c) += dpos * B.at(i, c);
        DB.at(i, c) += dpos * A.at(i, c);
      }
      // d(-log(1-P_j))/d dot = +P_j/tau, bank rows are constants
      for (std::size_t j = 0; j < neg[dir][i].size(); ++j) {
        const T dneg = neg[dir][i][j] * inv_n / tau;
        const T* bj = bank.row(negatives[i].indices[j]);
        for (std::size_t c = 0; c < d; ++c) DA.at(i, c) += dneg * bj[c];
      }
    }
  }
}

}  // namespace cgnn
