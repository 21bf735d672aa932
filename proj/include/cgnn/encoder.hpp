#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cgnn/tape.hpp"

namespace cgnn {

enum class Arch : std::uint8_t { GCN = 0, SAGE_MEAN = 1 };

Arch arch_from_string(const std::string& s);
std::string arch_to_string(Arch a);

struct Dims {
  std::size_t in = 0;
  std::size_t hidden = 128;
  std::size_t out = 128;
};

// Two-layer GNN parameters. GCN: weights = {W1, W2}. SAGE_MEAN: weights =
// {W1_self, W1_neigh, W2_self, W2_neigh}. biases = {b1, b2} in both cases.
template <class T>
struct EncoderParamsT {
  Arch arch = Arch::GCN;
  Dims dims;
  std::vector<Tensor<T>> weights;
  std::vector<Tensor<T>> biases;

  std::vector<Tensor<T>*> all_tensors() {
    std::vector<Tensor<T>*> out;
    for (auto& w : weights) out.push_back(&w);
    for (auto& b : biases) out.push_back(&b);
    return out;
  }

  template <class U>
  EncoderParamsT<U> cast() const {
    EncoderParamsT<U> p;
    p.arch = arch;
    p.dims = dims;
    for (const auto& w : weights) p.weights.push_back(w.template cast<U>());
    for (const auto& b : biases) p.biases.push_back(b.template cast<U>());
    return p;
  }
};

using EncoderParams = EncoderParamsT<float>;

EncoderParams init_params(Arch arch, Dims dims, std::uint64_t seed);

template <class T>
struct EncodeResult {
  std::vector<typename Tape<T>::Id> weight_ids;
  std::vector<typename Tape<T>::Id> bias_ids;
  typename Tape<T>::Id output = -1;  // N x dims.out, not L2-normalized
};

// Forward pass on a tape. ReLU after layer 1, linear layer 2; the loss layer
// is responsible for L2 normalization.
template <class T>
EncodeResult<T> encode(Tape<T>& tape, const EncoderParamsT<T>& params, const View& view,
                       const Tensor<T>& features, bool params_require_grad = true) {
  require(features.cols == params.dims.in, "encode: feature dim mismatch");
  require(features.rows == view.graph.num_nodes, "encode: node count mismatch");
  EncodeResult<T> r;
  for (const auto& w : params.weights)
    r.weight_ids.push_back(tape.input(w, params_require_grad));
  for (const auto& b : params.biases) r.bias_ids.push_back(tape.input(b, params_require_grad));
  const auto x = tape.constant(features);

  if (params.arch == Arch::GCN) {
    auto h = tape.relu(
        tape.add_bias(tape.spmm(view, tape.matmul(x, r.weight_ids[0])), r.bias_ids[0]));
    r.output = tape.add_bias(tape.matmul(tape.spmm(view, h), r.weight_ids[1]), r.bias_ids[1]);
  } else {
    auto agg1 = tape.neighbour_mean(view, x);
    auto h = tape.relu(tape.add_bias(
        tape.add(tape.matmul(x, r.weight_ids[0]), tape.matmul(agg1, r.weight_ids[1])),
        r.bias_ids[0]));
    auto agg2 = tape.neighbour_mean(view, h);
    r.output = tape.add_bias(
        tape.add(tape.matmul(h, r.weight_ids[2]), tape.matmul(agg2, r.weight_ids[3])),
        r.bias_ids[1]);
  }
  return r;
}

// Plain forward without a gradient tape (inference).
Tensor<float> encode_forward(const EncoderParams& params, const View& view,
                             const Tensor<float>& features);

// Checkpoint format: "CGP1", arch (u8), dims (3 x u64 LE), then each tensor
// as rows u64, cols u64, float32 LE payload (weights then biases).
void save_checkpoint(const EncoderParams& params, const std::string& path);
EncoderParams load_checkpoint(const std::string& path);

}  // namespace cgnn
