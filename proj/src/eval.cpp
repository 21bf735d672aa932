#include "cgnn/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>

#include "cgnn/contrastive.hpp"
#include "cgnn/errors.hpp"
#include "cgnn/kernels.hpp"
#include "cgnn/rng.hpp"
#include "cgnn/tape.hpp"

namespace cgnn {

static Tensor<float> l2_normalize_rows_plain(Tensor<float> x) {
  for (std::size_t i = 0; i < x.rows; ++i) {
    double s = 0;
    for (std::size_t j = 0; j < x.cols; ++j) s += double(x.at(i, j)) * x.at(i, j);
    const double m = std::max(std::sqrt(s), 1e-12);
    for (std::size_t j = 0; j < x.cols; ++j) x.at(i, j) = static_cast<float>(x.at(i, j) / m);
  }
  return x;
}

Tensor<float> embed_full(const EncoderParams& params, const Dataset& dataset) {
  Rng rng(0);
  const View view = drop_edges(dataset.graph, 0.0, rng);
  return l2_normalize_rows_plain(encode_forward(params, view, dataset.features));
}

ProbeReport linear_probe(const Tensor<float>& embeddings, const std::vector<int>& labels,
                         const Splits& splits, const ProbeConfig& cfg) {
  require(embeddings.rows == labels.size(), "linear_probe: label count mismatch");
  int num_classes = 0;
  for (int l : labels) num_classes = std::max(num_classes, l + 1);
  require(num_classes >= 2, "linear_probe: need at least 2 classes");
  const std::size_t d = embeddings.cols;
  const std::size_t c = static_cast<std::size_t>(num_classes);

  std::vector<char> in_train(c, 0);
  for (std::size_t i : splits.train)
    if (labels[i] >= 0) in_train[labels[i]] = 1;
  for (std::size_t k = 0; k < c; ++k)
    if (!in_train[k])
      std::cerr << "linear_probe: warning: class " << k << " absent from train split\n";

  auto eval_acc = [&](const Tensor<float>& w, const std::vector<std::size_t>& idx,
                      std::vector<double>* per_class) {
    std::vector<std::size_t> correct(c, 0), total(c, 0);
    std::size_t hits = 0, count = 0;
    for (std::size_t i : idx) {
      if (labels[i] < 0) continue;
      std::size_t best = 0;
      double best_s = -1e300;
      for (std::size_t k = 0; k < c; ++k) {
        double s = 0;
        for (std::size_t j = 0; j < d; ++j) s += double(w.at(k, j)) * embeddings.at(i, j);
        if (s > best_s) {  // strict: ties keep the smallest class index
          best_s = s;
          best = k;
        }
      }
      ++total[labels[i]];
      ++count;
      if (best == static_cast<std::size_t>(labels[i])) {
        ++correct[labels[i]];
        ++hits;
      }
    }
    if (per_class) {
      per_class->assign(c, 0.0);
      for (std::size_t k = 0; k < c; ++k)
        if (total[k]) (*per_class)[k] = double(correct[k]) / double(total[k]);
    }
    return count ? double(hits) / double(count) : 0.0;
  };

  Tensor<float> w(c, d, 0.0f);
  Tensor<float> best_w = w;
  double best_val = -1.0;
  std::vector<double> logits(c), probs(c);
  Tensor<double> grad(c, d);
  std::size_t n_train = 0;
  for (std::size_t i : splits.train)
    if (labels[i] >= 0) ++n_train;
  require(n_train > 0, "linear_probe: empty train split");

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    grad.fill(0.0);
    for (std::size_t i : splits.train) {
      if (labels[i] < 0) continue;
      double mx = -1e300;
      for (std::size_t k = 0; k < c; ++k) {
        double s = 0;
        for (std::size_t j = 0; j < d; ++j) s += double(w.at(k, j)) * embeddings.at(i, j);
        logits[k] = s;
        mx = std::max(mx, s);
      }
      double denom = 0;
      for (std::size_t k = 0; k < c; ++k) denom += (probs[k] = std::exp(logits[k] - mx));
      for (std::size_t k = 0; k < c; ++k) {
        const double err = probs[k] / denom - (k == static_cast<std::size_t>(labels[i]) ? 1 : 0);
        for (std::size_t j = 0; j < d; ++j) grad.at(k, j) += err * embeddings.at(i, j);
      }
    }
    const double inv = 1.0 / double(n_train);
    for (std::size_t k = 0; k < c; ++k)
      for (std::size_t j = 0; j < d; ++j) {
        const double g = grad.at(k, j) * inv + cfg.weight_decay * w.at(k, j);
        w.at(k, j) = static_cast<float>(w.at(k, j) - cfg.lr * g);
      }
    const double val = eval_acc(w, splits.val, nullptr);
    if (val > best_val) {
      best_val = val;
      best_w = w;
    }
  }

  ProbeReport rep;
  rep.val_accuracy = best_val;
  rep.accuracy = eval_acc(best_w, splits.test, &rep.per_class_accuracy);
  rep.probe_weights = std::move(best_w);
  return rep;
}

StabilityReport stability_matrix(const EncoderParams& params, const Dataset& dataset,
                                 std::size_t node, double rho, std::size_t trials,
                                 std::uint64_t seed) {
  require(node < dataset.graph.num_nodes, "stability_matrix: node out of range");
  require(trials >= 2, "stability_matrix: need at least 2 trials");
  const std::size_t d = params.dims.out;
  Tensor<float> z(trials, d);
  for (std::size_t t = 0; t < trials; ++t) {
    Rng rng(seed, {0x57ab, t});
    const View view = drop_edges(dataset.graph, rho, rng);
    const Tensor<float> emb =
        l2_normalize_rows_plain(encode_forward(params, view, dataset.features));
    for (std::size_t j = 0; j < d; ++j) z.at(t, j) = emb.at(node, j);
  }

  StabilityReport rep;
  rep.node = node;
  rep.similarity_matrix = Tensor<float>(trials, trials);
  double sum_off = 0.0;
  for (std::size_t a = 0; a < trials; ++a)
    for (std::size_t b = 0; b < trials; ++b) {
      double s = 0;
      for (std::size_t j = 0; j < d; ++j) s += double(z.at(a, j)) * z.at(b, j);
      if (a == b) s = 1.0;  // unit diagonal exactly
      rep.similarity_matrix.at(a, b) = static_cast<float>(s);
      if (a < b) sum_off += s;
    }
  rep.mean_similarity = sum_off / (0.5 * trials * (trials - 1));

  float lo = rep.similarity_matrix.v[0], hi = lo;
  for (float v : rep.similarity_matrix.v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  rep.normalized_matrix = rep.similarity_matrix;
  const float range = hi - lo;
  for (float& v : rep.normalized_matrix.v) v = range > 0 ? (v - lo) / range : 0.0f;
  return rep;
}

double silhouette(const Tensor<float>& embeddings, const std::vector<int>& labels) {
  require(embeddings.rows == labels.size(), "silhouette: label count mismatch");
  std::vector<std::size_t> scored;
  int num_classes = 0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] >= 0) {
      scored.push_back(i);
      num_classes = std::max(num_classes, labels[i] + 1);
    }
  require(num_classes >= 2, "silhouette: need at least 2 classes");
  std::vector<std::size_t> class_size(num_classes, 0);
  for (std::size_t i : scored) ++class_size[labels[i]];

  bool warned = false;
  const std::size_t m = scored.size();
  std::vector<double> scores(m, 0.0);
#pragma omp parallel for schedule(static) if (kernels::parallel_enabled())
  for (long long pi = 0; pi < static_cast<long long>(m); ++pi) {
    const std::size_t i = scored[pi];
    const int ci = labels[i];
    if (class_size[ci] < 2) continue;  // singleton convention: 0
    std::vector<double> dist_sum(num_classes, 0.0);
    for (std::size_t q = 0; q < m; ++q) {
      const std::size_t j = scored[q];
      if (j == i) continue;
      double d2 = 0;
      for (std::size_t cdim = 0; cdim < embeddings.cols; ++cdim) {
        const double diff = double(embeddings.at(i, cdim)) - embeddings.at(j, cdim);
        d2 += diff * diff;
      }
      dist_sum[labels[j]] += std::sqrt(d2);
    }
    const double a = dist_sum[ci] / double(class_size[ci] - 1);
    double b = 1e300;
    for (int k = 0; k < num_classes; ++k)
      if (k != ci && class_size[k] > 0) b = std::min(b, dist_sum[k] / double(class_size[k]));
    scores[pi] = (b - a) / std::max(a, b);
  }
  for (std::size_t pi = 0; pi < m; ++pi)
    if (class_size[labels[scored[pi]]] < 2 && !warned) {
      std::cerr << "silhouette: warning: singleton class, scoring 0 for its nodes\n";
      warned = true;
    }
  double total = 0;
  for (double s : scores) total += s;
  return total / double(m);
}

// --- MI toy -------------------------------------------------------------

double toy_enumerated_loss(const Tensor<double>& wn, std::size_t K, double tau,
                           Tensor<double>* grad_wn) {
  const std::size_t M = wn.rows;
  // pairwise scores h[s][m] = exp(dot/tau)
  Tensor<double> h(M, M);
  for (std::size_t s = 0; s < M; ++s)
    for (std::size_t m = 0; m < M; ++m) {
      double dot = 0;
      for (std::size_t j = 0; j < wn.cols; ++j) dot += wn.at(s, j) * wn.at(m, j);
      h.at(s, m) = std::exp(dot / tau);
    }
  if (grad_wn) grad_wn->fill(0.0);
  Tensor<double> dS(M, M, 0.0);  // dL/dS accumulated over all terms

  // enumerate negative-count multisets (n_1..n_M), sum n = K, with
  // multinomial weights; recursion over symbols
  std::vector<std::size_t> counts(M, 0);
  std::vector<double> log_fact(K + 1, 0.0);
  for (std::size_t i = 2; i <= K; ++i) log_fact[i] = log_fact[i - 1] + std::log(double(i));
  const double log_pm = -std::log(double(M));
  double loss = 0.0;

  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t sym, std::size_t left) {
    if (sym == M - 1) {
      counts[M - 1] = left;
      double log_w = log_fact[K] + double(K) * log_pm;
      for (std::size_t m = 0; m < M; ++m) log_w -= log_fact[counts[m]];
      const double w_counts = std::exp(log_w);
      for (std::size_t s = 0; s < M; ++s) {
        const double w = w_counts / double(M);  // anchor probability 1/M
        double denom = h.at(s, s);              // the positive
        for (std::size_t m = 0; m < M; ++m) denom += double(counts[m]) * h.at(s, m);
        loss += w * (std::log(denom) - std::log(h.at(s, s)));
        if (grad_wn) {
          for (std::size_t m = 0; m < M; ++m) {
            const double coeff = double(counts[m]) + (m == s ? 1.0 : 0.0);
            if (coeff > 0) dS.at(s, m) += w * coeff * h.at(s, m) / (tau * denom);
          }
          dS.at(s, s) -= w / tau;
        }
      }
      return;
    }
    for (std::size_t n = 0; n <= left; ++n) {
      counts[sym] = n;
      rec(sym + 1, left - n);
    }
  };
  rec(0, K);

  if (grad_wn) {
    for (std::size_t s = 0; s < M; ++s)
      for (std::size_t m = 0; m < M; ++m) {
        const double g = dS.at(s, m);
        if (g == 0) continue;
        if (s == m) {
          for (std::size_t j = 0; j < wn.cols; ++j) grad_wn->at(s, j) += 2.0 * g * wn.at(s, j);
        } else {
          for (std::size_t j = 0; j < wn.cols; ++j) {
            grad_wn->at(s, j) += g * wn.at(m, j);
            grad_wn->at(m, j) += g * wn.at(s, j);
          }
        }
      }
  }
  return loss;
}

MiToyReport mi_toy_validate(std::size_t num_symbols, std::size_t K, double tau, std::size_t steps,
                            std::uint64_t seed) {
  require(num_symbols >= 2, "mi_toy: need at least 2 symbols");
  require(K >= 1, "mi_toy: K must be >= 1");
  const std::size_t M = num_symbols, d = num_symbols;
  Tensor<double> w(M, d);
  Rng rng(seed, {0x701});
  for (auto& v : w.v) v = rng.next_gaussian();

  MiToyReport rep;
  rep.true_mi = std::log(double(M));
  double loss = 0.0;
  for (std::size_t step = 0; step <= steps; ++step) {
    // normalize rows, evaluate enumerated loss + grad, chain through the
    // normalization, plain gradient descent
    Tape<double> tape;
    const auto wid = tape.input(w, true);
    const auto wn = tape.l2_normalize_rows(wid);
    Tensor<double> grad_wn(M, d);
    loss = toy_enumerated_loss(tape.val(wn), K, tau, &grad_wn);
    if (step == 0) rep.bound_initial = mi_lower_bound(loss, K);
    if (step == steps) break;
    // drive backward with the hand-computed dL/dwn
    const auto dummy = tape.custom(
        Tensor<double>(1, 1, {loss}), true, [wn, grad_wn](Tape<double>& t, int out) {
          const double g = t.grad(out).v[0];
          auto& dwn = t.grad_mut(wn);
          for (std::size_t i = 0; i < dwn.size(); ++i) dwn.v[i] += g * grad_wn.v[i];
        });
    tape.backward(dummy);
    const auto& gw = tape.grad(wid);
    for (std::size_t i = 0; i < w.size(); ++i) w.v[i] -= 0.5 * gw.v[i];
  }
  rep.loss_final = loss;
  rep.bound = mi_lower_bound(loss, K);
  return rep;
}

}  // namespace cgnn
