#include "cgnn/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "cgnn/errors.hpp"
#include "cgnn/kernels.hpp"

namespace cgnn {

void apply_config_kv(TrainConfig& cfg, const std::string& key, const std::string& value) {
  try {
    if (key == "rho")
      cfg.contrastive.rho = std::stod(value);
    else if (key == "tau")
      cfg.contrastive.tau = std::stod(value);
    else if (key == "k")
      cfg.contrastive.K = std::stoul(value);
    else if (key == "lr")
      cfg.lr = std::stod(value);
    else if (key == "iterations")
      cfg.iterations = std::stoul(value);
    else if (key == "arch")
      cfg.arch = arch_from_string(value);
    else if (key == "seed")
      cfg.seed = std::stoull(value);
    else if (key == "hidden_dim")
      cfg.hidden_dim = std::stoul(value);
    else if (key == "eval_every")
      cfg.eval_every = std::stoul(value);
    else if (key == "deterministic")
      cfg.deterministic = (value == "1" || value == "true");
    else
      throw ParseError("unknown config key: " + key);
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception&) {
    throw ParseError("bad value for config key " + key + ": " + value);
  }
}

TrainConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  TrainConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto h = line.find('#');
    if (h != std::string::npos) line.resize(h);
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      if (line.find_first_not_of(" \t\r") != std::string::npos)
        throw ParseError(path + ":" + std::to_string(lineno) + ": expected key = value");
      continue;
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string();
      const auto e = s.find_last_not_of(" \t\r");
      return s.substr(b, e - b + 1);
    };
    apply_config_kv(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

AdamState AdamState::like(const std::vector<Tensor<float>*>& params) {
  AdamState s;
  for (const auto* p : params) {
    s.m.emplace_back(p->rows, p->cols, 0.0f);
    s.v.emplace_back(p->rows, p->cols, 0.0f);
  }
  return s;
}

void adam_step(const std::vector<Tensor<float>*>& params,
               const std::vector<const Tensor<float>*>& grads, AdamState& state, double lr,
               std::size_t t) {
  require(params.size() == grads.size() && params.size() == state.m.size(),
          "adam_step: state shape mismatch");
  const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  const double corr1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double corr2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  for (std::size_t p = 0; p < params.size(); ++p) {
    require(params[p]->same_shape(*grads[p]), "adam_step: grad shape mismatch");
    auto& w = params[p]->v;
    const auto& g = grads[p]->v;
    auto& m = state.m[p].v;
    auto& v = state.v[p].v;
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = static_cast<float>(beta1 * m[i] + (1.0 - beta1) * g[i]);
      v[i] = static_cast<float>(beta2 * v[i] + (1.0 - beta2) * g[i] * g[i]);
      const double mhat = m[i] / corr1;
      const double vhat = v[i] / corr2;
      w[i] = static_cast<float>(w[i] - lr * mhat / (std::sqrt(vhat) + eps));
    }
  }
}

TrainReport train(const TrainConfig& config, const Dataset& dataset, const EvalHook& hook) {
  config.validate(dataset.graph.num_nodes);
  const auto t_start = std::chrono::steady_clock::now();
  const bool was_parallel = kernels::parallel_enabled();
  if (config.deterministic) kernels::set_parallel(false);

  const std::size_t n = dataset.graph.num_nodes;
  const Dims dims{dataset.features.cols, config.hidden_dim, config.hidden_dim};
  EncoderParams params = init_params(config.arch, dims, config.seed);
  AdamState adam = AdamState::like(params.all_tensors());
  EmbeddingBank bank;

  TrainReport report;
  report.loss_curve.reserve(config.iterations);
  report.mi_bound_curve.reserve(config.iterations);

  for (std::size_t iter = 0; iter < config.iterations; ++iter) {
    Rng drop_rng1(config.seed, {0xd109, iter, 1});
    Rng drop_rng2(config.seed, {0xd109, iter, 2});
    const View view1 = drop_edges(dataset.graph, config.contrastive.rho, drop_rng1);
    const View view2 = drop_edges(dataset.graph, config.contrastive.rho, drop_rng2);

    Tape<float> tape;
    const auto enc1 = encode(tape, params, view1, dataset.features);
    const auto enc2 = encode(tape, params, view2, dataset.features);
    const auto z1 = tape.l2_normalize_rows(enc1.output);
    const auto z2 = tape.l2_normalize_rows(enc2.output);

    if (!bank.initialized) bank_update(bank, tape.val(z1), tape.val(z2));

    const auto negatives =
        sample_all_negatives(n, config.contrastive.K, config.seed, iter);
    const auto loss_id =
        nce_loss(tape, z1, z2, bank.view1, bank.view2, negatives,
                 static_cast<float>(config.contrastive.tau), config.contrastive.K, n,
                 bank.initialized);
    const double loss = tape.val(loss_id).v[0];
    if (!std::isfinite(loss)) {
      kernels::set_parallel(was_parallel);
      throw NumericError("non-finite loss at iteration " + std::to_string(iter) + ": " +
                         std::to_string(loss));
    }
    report.loss_curve.push_back(loss);
    // L1 + L2 are symmetric in expectation; report the bound on the per-view loss
    report.mi_bound_curve.push_back(mi_lower_bound(0.5 * loss, config.contrastive.K));

    tape.backward(loss_id);

    std::vector<Tensor<float>*> ptensors = params.all_tensors();
    std::vector<const Tensor<float>*> grads;
    // grads accumulate over both encodes; weight/bias ids were recorded per encode
    std::vector<Tensor<float>> grad_store;
    grad_store.reserve(ptensors.size());
    const std::size_t nw = params.weights.size();
    for (std::size_t i = 0; i < nw; ++i) {
      Tensor<float> g = tape.grad(enc1.weight_ids[i]);
      const auto& g2 = tape.grad(enc2.weight_ids[i]);
      for (std::size_t j = 0; j < g.size(); ++j) g.v[j] += g2.v[j];
      grad_store.push_back(std::move(g));
    }
    for (std::size_t i = 0; i < params.biases.size(); ++i) {
      Tensor<float> g = tape.grad(enc1.bias_ids[i]);
      const auto& g2 = tape.grad(enc2.bias_ids[i]);
      for (std::size_t j = 0; j < g.size(); ++j) g.v[j] += g2.v[j];
      grad_store.push_back(std::move(g));
    }
    for (const auto& g : grad_store) grads.push_back(&g);
    adam_step(ptensors, grads, adam, config.lr, iter + 1);

    bank_update(bank, tape.val(z1), tape.val(z2));

    if (hook && config.eval_every > 0 &&
        ((iter + 1) % config.eval_every == 0 || iter + 1 == config.iterations))
      hook(iter + 1, params, report.loss_curve);
  }

  kernels::set_parallel(was_parallel);
  report.final_params = std::move(params);
  report.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return report;
}

void write_curves_csv(const TrainReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "iteration,loss,mi_bound\n";
  for (std::size_t i = 0; i < report.loss_curve.size(); ++i)
    out << i << "," << report.loss_curve[i] << "," << report.mi_bound_curve[i] << "\n";
}

}  // namespace cgnn
