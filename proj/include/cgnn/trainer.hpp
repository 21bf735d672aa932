#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cgnn/contrastive.hpp"
#include "cgnn/encoder.hpp"
#include "cgnn/graph.hpp"

namespace cgnn {

struct TrainConfig {
  ContrastiveConfig contrastive;
  double lr = 0.001;
  std::size_t iterations = 5000;
  Arch arch = Arch::GCN;
  std::uint64_t seed = 0;
  std::size_t hidden_dim = 128;
  std::size_t eval_every = 0;  // 0 = no eval hook
  bool deterministic = true;

  void validate(std::size_t num_nodes) const {
    require(lr > 0, "lr must be positive");
    require(iterations >= 1, "iterations must be >= 1");
    contrastive.validate(num_nodes);
  }
};

// Flat "key = value" config file; unknown keys are an error.
TrainConfig parse_config_file(const std::string& path);
void apply_config_kv(TrainConfig& cfg, const std::string& key, const std::string& value);

struct TrainReport {
  std::vector<double> loss_curve;
  std::vector<double> mi_bound_curve;
  double wall_time_s = 0.0;
  EncoderParams final_params;
};

// Adam with beta1=0.9, beta2=0.999, eps=1e-8, bias-corrected moments.
struct AdamState {
  std::vector<Tensor<float>> m;
  std::vector<Tensor<float>> v;

  static AdamState like(const std::vector<Tensor<float>*>& params);
};

void adam_step(const std::vector<Tensor<float>*>& params,
               const std::vector<const Tensor<float>*>& grads, AdamState& state, double lr,
               std::size_t t);

// Called every eval_every iterations (and after the last one) when set.
using EvalHook = std::function<void(std::size_t iteration, const EncoderParams& params,
                                    const std::vector<double>& loss_curve)>;

TrainReport train(const TrainConfig& config, const Dataset& dataset, const EvalHook& hook = {});

void write_curves_csv(const TrainReport& report, const std::string& path);

}  // namespace cgnn
