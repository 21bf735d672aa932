#pragma once

#include <cstdint>
#include <vector>

#include "cgnn/encoder.hpp"
#include "cgnn/graph.hpp"

namespace cgnn {

// Encode on the full undropped graph (rho = 0 view), rows L2-normalized.
Tensor<float> embed_full(const EncoderParams& params, const Dataset& dataset);

struct ProbeConfig {
  double lr = 0.01;
  std::size_t epochs = 300;
  double weight_decay = 1e-4;
};

struct ProbeReport {
  double accuracy = 0.0;                  // test accuracy at the best-val epoch
  double val_accuracy = 0.0;
  std::vector<double> per_class_accuracy;
  Tensor<float> probe_weights;            // C x d
};

// Softmax regression on frozen embeddings; full-batch gradient descent,
// selected by validation accuracy. Ties in argmax go to the smallest class.
ProbeReport linear_probe(const Tensor<float>& embeddings, const std::vector<int>& labels,
                         const Splits& splits, const ProbeConfig& cfg = {});

struct StabilityReport {
  std::size_t node = 0;
  Tensor<float> similarity_matrix;   // T x T cosine matrix
  Tensor<float> normalized_matrix;   // min-max scaled copy
  double mean_similarity = 0.0;      // raw off-diagonal mean
};

StabilityReport stability_matrix(const EncoderParams& params, const Dataset& dataset,
                                 std::size_t node, double rho, std::size_t trials,
                                 std::uint64_t seed);

// Mean silhouette with Euclidean distance over nodes with labels >= 0.
// Singleton-class nodes score 0 (with a warning on stderr).
double silhouette(const Tensor<float>& embeddings, const std::vector<int>& labels);

struct MiToyReport {
  double bound = 0.0;       // log(K) - L1 after optimization
  double bound_initial = 0.0;
  double true_mi = 0.0;     // log(M) by exact enumeration
  double loss_final = 0.0;
};

// Discrete two-view source: both views emit the one-hot of the same uniform
// symbol, so the true MI is log M. The symbol embeddings are a trainable
// linear map; the softmax contrastive loss L1 is computed by exact
// enumeration over anchor symbols and negative-sample multisets.
MiToyReport mi_toy_validate(std::size_t num_symbols, std::size_t K, double tau, std::size_t steps,
                            std::uint64_t seed = 0);

// Exact enumerated L1 for the toy source given symbol embeddings (rows of wn,
// assumed unit norm). Fills grad_wn (same shape) when non-null.
double toy_enumerated_loss(const Tensor<double>& wn, std::size_t K, double tau,
                           Tensor<double>* grad_wn);

}  // namespace cgnn
