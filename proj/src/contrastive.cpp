#include "cgnn/contrastive.hpp"

#include <algorithm>
#include <unordered_set>

namespace cgnn {

void bank_update(EmbeddingBank& bank, const Tensor<float>& z1_detached,
                 const Tensor<float>& z2_detached) {
  require(z1_detached.same_shape(z2_detached), "bank_update: view shape mismatch");
  if (bank.initialized)
    require(bank.view1.same_shape(z1_detached), "bank_update: shape change not allowed");
  bank.view1 = z1_detached;
  bank.view2 = z2_detached;
  bank.initialized = true;
}

NegativeSample sample_negatives(std::size_t anchor, std::size_t N, std::size_t K, Rng& rng) {
  require(N >= 2 && K >= 1 && K <= N - 1, "sample_negatives: K must be in [1, N-1]");
  require(anchor < N, "sample_negatives: anchor out of range");
  NegativeSample out;
  out.anchor = anchor;
  const std::size_t M = N - 1;  // candidate space excluding the anchor
  auto to_id = [anchor](std::size_t c) { return c < anchor ? c : c + 1; };

  if (K * 2 <= M) {
    // Floyd's algorithm: O(K) draws, uniform over K-subsets
    std::unordered_set<std::size_t> chosen;
    chosen.reserve(K * 2);
    for (std::size_t i = M - K; i < M; ++i) {
      const std::size_t t = rng.next_below(i + 1);
      if (!chosen.insert(t).second) chosen.insert(i);
    }
    out.indices.reserve(K);
    for (std::size_t c : chosen) out.indices.push_back(to_id(c));
  } else {
    std::vector<std::size_t> cand(M);
    for (std::size_t c = 0; c < M; ++c) cand[c] = c;
    for (std::size_t i = 0; i < K; ++i)
      std::swap(cand[i], cand[i + rng.next_below(M - i)]);
    out.indices.reserve(K);
    for (std::size_t i = 0; i < K; ++i) out.indices.push_back(to_id(cand[i]));
  }
  std::sort(out.indices.begin(), out.indices.end());
  return out;
}

std::vector<NegativeSample> sample_all_negatives(std::size_t N, std::size_t K, std::uint64_t seed,
                                                 std::uint64_t iteration) {
  std::vector<NegativeSample> out(N);
#pragma omp parallel for schedule(static) if (kernels::parallel_enabled())
  for (long long a = 0; a < static_cast<long long>(N); ++a) {
    Rng rng(seed, {0x9e6, iteration, static_cast<std::uint64_t>(a)});
    out[a] = sample_negatives(static_cast<std::size_t>(a), N, K, rng);
  }
  return out;
}

double sampling_risk(const std::vector<std::size_t>& sampled_set,
                     const std::set<std::size_t>& similar_set) {
  require(!sampled_set.empty(), "sampling_risk: sampled set must be nonempty");
  std::size_t overlap = 0;
  for (std::size_t v : sampled_set)
    if (similar_set.count(v)) ++overlap;
  return static_cast<double>(overlap) / static_cast<double>(sampled_set.size());
}

std::set<std::size_t> similar_set_by_label(const std::vector<int>& labels, std::size_t anchor) {
  require(anchor < labels.size(), "similar_set: anchor out of range");
  std::set<std::size_t> out;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (i != anchor && labels[i] == labels[anchor] && labels[anchor] >= 0) out.insert(i);
  return out;
}

std::set<std::size_t> similar_set_by_cosine(const Tensor<float>& embeddings, std::size_t anchor,
                                            double threshold) {
  require(anchor < embeddings.rows, "similar_set: anchor out of range");
  std::set<std::size_t> out;
  for (std::size_t i = 0; i < embeddings.rows; ++i) {
    if (i == anchor) continue;
    // rows are unit-norm, so the dot product is the cosine
    if (row_dot(embeddings, anchor, embeddings, i) >= static_cast<float>(threshold)) out.insert(i);
  }
  return out;
}

}  // namespace cgnn
