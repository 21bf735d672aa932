// Acceptance gate: one pass/fail line per criterion, nonzero exit on failure.
// Criterion 8 re-runs criteria 1-6 and compares numeric digests bitwise.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>
#include <vector>

#include "cgnn/contrastive.hpp"
#include "cgnn/encoder.hpp"
#include "cgnn/eval.hpp"
#include "cgnn/gradcheck.hpp"
#include "cgnn/graph.hpp"
#include "cgnn/trainer.hpp"

using namespace cgnn;

namespace {

// FNV-1a over the raw bytes of every recorded double
struct Digest {
  std::uint64_t h = 1469598103934665603ULL;
  void add(double x) {
    unsigned char b[sizeof(double)];
    std::memcpy(b, &x, sizeof(double));
    for (unsigned char c : b) {
      h ^= c;
      h *= 1099511628211ULL;
    }
  }
  void add_all(const std::vector<double>& xs) {
    for (double x : xs) add(x);
  }
};

struct Outcome {
  bool pass = false;
  std::uint64_t digest = 0;
  std::string detail;
};

Tensor<double> random_unit_rows(std::size_t n, std::size_t d, std::uint64_t seed) {
  Tensor<double> z(n, d);
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0;
    for (std::size_t j = 0; j < d; ++j) {
      z.at(i, j) = rng.next_gaussian();
      s += z.at(i, j) * z.at(i, j);
    }
    for (std::size_t j = 0; j < d; ++j) z.at(i, j) /= std::sqrt(s);
  }
  return z;
}

// ---- criterion 1: gradient correctness ----------------------------------

Outcome criterion1() {
  Outcome out;
  Digest dg;
  double worst = 0;
  bool ok = true;

  for (std::uint64_t seed = 0; seed < 20 && ok; ++seed) {
    // primitive: matmul + l2_normalize against a random linear functional
    {
      Tensor<double> a(4, 3), b(3, 5), c(4, 5);
      Rng rng(seed, {1});
      for (auto& v : a.v) v = rng.next_gaussian();
      for (auto& v : b.v) v = rng.next_gaussian();
      for (auto& v : c.v) v = rng.next_gaussian();
      auto f = [&](const std::vector<Tensor<double>>& in) {
        Tape<double> t;
        const auto y = t.l2_normalize_rows(t.matmul(t.input(in[0], true), t.input(in[1], true)));
        return t.val(t.sum(t.mul(y, t.constant(c)))).v[0];
      };
      Tape<double> t;
      const auto ia = t.input(a, true), ib = t.input(b, true);
      const auto y = t.l2_normalize_rows(t.matmul(ia, ib));
      t.backward(t.sum(t.mul(y, t.constant(c))));
      const auto rep = grad_check(f, {a, b}, {t.grad(ia), t.grad(ib)});
      ok = ok && rep.pass;
      worst = std::max(worst, rep.max_rel_error);
      dg.add(rep.max_rel_error);
    }

    // primitive: relu, inputs kept away from the kink
    {
      Tensor<double> x(4, 5), c(4, 5);
      Rng rng(seed, {10});
      for (auto& v : x.v) {
        const double g = rng.next_gaussian();
        v = (g < 0 ? -1.0 : 1.0) * (0.1 + std::fabs(g));
      }
      for (auto& v : c.v) v = rng.next_gaussian();
      auto f = [&](const std::vector<Tensor<double>>& in) {
        Tape<double> t;
        return t.val(t.sum(t.mul(t.relu(t.input(in[0], true)), t.constant(c)))).v[0];
      };
      Tape<double> t;
      const auto ix = t.input(x, true);
      t.backward(t.sum(t.mul(t.relu(ix), t.constant(c))));
      const auto rep = grad_check(f, {x}, {t.grad(ix)});
      ok = ok && rep.pass;
      worst = std::max(worst, rep.max_rel_error);
      dg.add(rep.max_rel_error);
    }

    // primitive: spmm + add_bias on a random <=10-node graph
    {
      Rng grng(seed, {2});
      const std::size_t n = 5 + grng.next_below(6);
      std::vector<std::pair<std::size_t, std::size_t>> edges;
      for (std::size_t u = 0; u < n; ++u)
        for (std::size_t v = u + 1; v < n; ++v)
          if (grng.next_double() < 0.4) edges.emplace_back(u, v);
      const Graph g = Graph::from_edges(n, edges);
      Rng drng(seed, {3});
      const View view = drop_edges(g, 0.2, drng);
      Tensor<double> x(n, 3);
      Tensor<double> bias(1, 3);
      Rng rng(seed, {4});
      for (auto& v : x.v) v = rng.next_gaussian();
      for (auto& v : bias.v) v = rng.next_gaussian();
      auto f = [&](const std::vector<Tensor<double>>& in) {
        Tape<double> t;
        const auto y = t.add_bias(t.spmm(view, t.input(in[0], true)), t.input(in[1], true));
        return t.val(t.mean(t.mul(y, y))).v[0];
      };
      Tape<double> t;
      const auto ix = t.input(x, true), ibias = t.input(bias, true);
      const auto y = t.add_bias(t.spmm(view, ix), ibias);
      t.backward(t.mean(t.mul(y, y)));
      const auto rep = grad_check(f, {x, bias}, {t.grad(ix), t.grad(ibias)});
      ok = ok && rep.pass;
      worst = std::max(worst, rep.max_rel_error);
      dg.add(rep.max_rel_error);
    }

    // composite: 2-layer GCN -> L2 normalize -> NCE loss
    {
      Rng grng(seed, {5});
      const std::size_t n = 6 + grng.next_below(5);
      std::vector<std::pair<std::size_t, std::size_t>> edges;
      for (std::size_t u = 0; u + 1 < n; ++u) edges.emplace_back(u, u + 1);
      for (std::size_t u = 0; u < n; ++u)
        for (std::size_t v = u + 2; v < n; ++v)
          if (grng.next_double() < 0.3) edges.emplace_back(u, v);
      const Graph g = Graph::from_edges(n, edges);
      Rng d1(seed, {6}), d2(seed, {7});
      const View v1 = drop_edges(g, 0.2, d1);
      const View v2 = drop_edges(g, 0.2, d2);
      Tensor<double> x(n, 3);
      Rng rng(seed, {8});
      for (auto& v : x.v) v = rng.next_gaussian();
      // reject parameter draws whose layer-1 pre-activations sit within the
      // finite-difference step of the relu kink, or whose output rows are so
      // short that l2_normalize curvature dominates the central difference
      EncoderParamsT<double> pd;
      for (std::uint64_t attempt = 0;; ++attempt) {
        pd = init_params(Arch::GCN, {3, 4, 4}, seed * 100 + attempt).cast<double>();
        double closest = 1e9, min_norm = 1e9;
        for (const View* vp : {&v1, &v2}) {
          Tape<double> t;
          const auto pre = t.add_bias(t.spmm(*vp, t.matmul(t.constant(x),
                                                           t.constant(pd.weights[0]))),
                                      t.constant(pd.biases[0]));
          for (double v : t.val(pre).v) closest = std::min(closest, std::fabs(v));
          const auto r = encode(t, pd, *vp, x, false);
          const auto& out = t.val(r.output);
          for (std::size_t i = 0; i < out.rows; ++i) {
            double s = 0;
            for (std::size_t j = 0; j < out.cols; ++j) s += out.at(i, j) * out.at(i, j);
            min_norm = std::min(min_norm, std::sqrt(s));
          }
        }
        if ((closest > 5e-3 && min_norm > 1e-2) || attempt > 50) break;
      }
      const auto bank1 = random_unit_rows(n, 4, seed * 3 + 1);
      const auto bank2 = random_unit_rows(n, 4, seed * 3 + 2);
      std::vector<NegativeSample> negs(n);
      Rng nrng(seed, {9});
      for (std::size_t i = 0; i < n; ++i) negs[i] = sample_negatives(i, n, 2, nrng);

      auto f = [&](const std::vector<Tensor<double>>& in) {
        Tape<double> t;
        EncoderParamsT<double> p = pd;
        std::size_t idx = 0;
        for (auto& w : p.weights) w = in[idx++];
        for (auto& b : p.biases) b = in[idx++];
        const auto r1 = encode(t, p, v1, x);
        const auto r2 = encode(t, p, v2, x);
        const auto z1 = t.l2_normalize_rows(r1.output);
        const auto z2 = t.l2_normalize_rows(r2.output);
        return t.val(nce_loss(t, z1, z2, bank1, bank2, negs, 0.5, std::size_t(2), n)).v[0];
      };
      std::vector<Tensor<double>> inputs;
      for (const auto& w : pd.weights) inputs.push_back(w);
      for (const auto& b : pd.biases) inputs.push_back(b);

      Tape<double> t;
      const auto r1 = encode(t, pd, v1, x);
      const auto r2 = encode(t, pd, v2, x);
      const auto z1 = t.l2_normalize_rows(r1.output);
      const auto z2 = t.l2_normalize_rows(r2.output);
      t.backward(nce_loss(t, z1, z2, bank1, bank2, negs, 0.5, std::size_t(2), n));
      std::vector<Tensor<double>> analytic;
      for (std::size_t i = 0; i < r1.weight_ids.size(); ++i) {
        Tensor<double> g1 = t.grad(r1.weight_ids[i]);
        const auto& g2 = t.grad(r2.weight_ids[i]);
        for (std::size_t j = 0; j < g1.size(); ++j) g1.v[j] += g2.v[j];
        analytic.push_back(std::move(g1));
      }
      for (std::size_t i = 0; i < r1.bias_ids.size(); ++i) {
        Tensor<double> g1 = t.grad(r1.bias_ids[i]);
        const auto& g2 = t.grad(r2.bias_ids[i]);
        for (std::size_t j = 0; j < g1.size(); ++j) g1.v[j] += g2.v[j];
        analytic.push_back(std::move(g1));
      }
      const auto rep = grad_check(f, inputs, analytic, 1e-4);
      ok = ok && rep.pass;
      worst = std::max(worst, rep.max_rel_error);
      dg.add(rep.max_rel_error);
    }
  }
  out.pass = ok;
  out.digest = dg.h;
  char buf[96];
  std::snprintf(buf, sizeof(buf), "max rel error %.2e (tol 1e-3), 20 seeds", worst);
  out.detail = buf;
  return out;
}

// ---- criterion 2: loss-oracle equivalence --------------------------------

double oracle_h(const Tensor<double>& a, std::size_t i, const Tensor<double>& b, std::size_t j,
                double tau) {
  double dot = 0;
  for (std::size_t c = 0; c < a.cols; ++c) dot += a.at(i, c) * b.at(j, c);
  return std::exp(dot / tau);
}

double oracle_softmax(const Tensor<double>& z1, const Tensor<double>& z2,
                      const std::vector<NegativeSample>& negs, double tau) {
  double total = 0;
  for (int dir = 0; dir < 2; ++dir) {
    const Tensor<double>& a = dir == 0 ? z1 : z2;
    const Tensor<double>& b = dir == 0 ? z2 : z1;
    double acc = 0;
    for (std::size_t i = 0; i < a.rows; ++i) {
      double denom = oracle_h(a, i, b, i, tau);
      for (std::size_t j : negs[i].indices) denom += oracle_h(a, i, b, j, tau);
      acc += -std::log(oracle_h(a, i, b, i, tau) / denom);
    }
    total += acc / double(a.rows);
  }
  return total;
}

double oracle_nce(const Tensor<double>& z1, const Tensor<double>& z2, const Tensor<double>& b1,
                  const Tensor<double>& b2, const std::vector<NegativeSample>& negs, double tau,
                  std::size_t K, std::size_t N) {
  const double pn = double(K) / double(N);
  double total = 0;
  for (int dir = 0; dir < 2; ++dir) {
    const Tensor<double>& a = dir == 0 ? z1 : z2;
    const Tensor<double>& b = dir == 0 ? z2 : z1;
    const Tensor<double>& bank = dir == 0 ? b2 : b1;
    double acc = 0;
    for (std::size_t i = 0; i < a.rows; ++i) {
      const double hp = oracle_h(a, i, b, i, tau);
      double term = std::log(hp / (hp + pn));
      for (std::size_t j : negs[i].indices) {
        const double hn = oracle_h(a, i, bank, j, tau);
        term += std::log(1.0 - hn / (hn + pn));
      }
      acc += term;
    }
    total += -acc / double(a.rows);
  }
  return total;
}

Outcome criterion2() {
  Outcome out;
  Digest dg;
  double worst = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng srng(seed, {20});
    const std::size_t n = 4 + srng.next_below(5);  // <= 8
    const std::size_t K = 1 + srng.next_below(std::min<std::size_t>(3, n - 1));
    const double tau = 0.2 + 0.6 * srng.next_double();
    const auto z1 = random_unit_rows(n, 5, seed * 4 + 1);
    const auto z2 = random_unit_rows(n, 5, seed * 4 + 2);
    const auto b1 = random_unit_rows(n, 5, seed * 4 + 3);
    const auto b2 = random_unit_rows(n, 5, seed * 4 + 4);
    std::vector<NegativeSample> negs(n);
    Rng nrng(seed, {21});
    for (std::size_t i = 0; i < n; ++i) negs[i] = sample_negatives(i, n, K, nrng);

    Tape<double> t1;
    const double soft =
        t1.val(softmax_contrastive_loss(t1, t1.input(z1, false), t1.input(z2, false), negs, tau))
            .v[0];
    Tape<double> t2;
    const double nce = t2.val(nce_loss(t2, t2.input(z1, false), t2.input(z2, false), b1, b2, negs,
                                       tau, K, n))
                           .v[0];
    worst = std::max(worst, std::fabs(soft - oracle_softmax(z1, z2, negs, tau)));
    worst = std::max(worst, std::fabs(nce - oracle_nce(z1, z2, b1, b2, negs, tau, K, n)));
    dg.add(soft);
    dg.add(nce);
  }
  out.pass = worst < 1e-5;
  out.digest = dg.h;
  char buf[96];
  std::snprintf(buf, sizeof(buf), "max abs diff vs oracles %.2e (tol 1e-5), 100 seeds", worst);
  out.detail = buf;
  return out;
}

// ---- criterion 3: MI bound ----------------------------------------------

Outcome criterion3() {
  Outcome out;
  Digest dg;
  bool ok = true;
  double m8k7_bound = 0;
  for (std::size_t M : {2, 4, 8}) {
    for (std::size_t K : {1, 3, 7}) {
      const auto rep = mi_toy_validate(M, K, 0.5, 400);
      ok = ok && rep.bound <= rep.true_mi + 1e-6 && rep.bound_initial <= rep.true_mi + 1e-6;
      if (M == 8 && K == 7) m8k7_bound = rep.bound;
      dg.add(rep.bound);
      dg.add(rep.bound_initial);
    }
  }
  ok = ok && m8k7_bound > 0.5 * std::log(8.0);
  out.pass = ok;
  out.digest = dg.h;
  char buf[96];
  std::snprintf(buf, sizeof(buf), "bounds <= log M on 3x3 grid; M=8,K=7 bound %.4f > %.4f",
                m8k7_bound, 0.5 * std::log(8.0));
  out.detail = buf;
  return out;
}

// ---- criteria 4 and 5: end-to-end quality and stability ------------------

struct TrainedModels {
  Dataset dataset;
  std::vector<EncoderParams> params;  // one per seed
  bool ready = false;
};

Outcome criterion4(TrainedModels& models) {
  Outcome out;
  Digest dg;
  models.dataset = generate_sbm(3, 100, 0.1, 0.01, 16, 1.0, 7);
  const Dataset& ds = models.dataset;

  const auto raw = linear_probe(ds.features, ds.labels, ds.splits);
  dg.add(raw.accuracy);

  int wins = 0;
  models.params.clear();
  std::string accs;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    TrainConfig cfg;
    cfg.contrastive = {0.1, 128, 0.3};  // tau, K, rho
    cfg.lr = 0.001;
    cfg.iterations = 1000;
    cfg.arch = Arch::GCN;
    cfg.seed = seed;
    const auto rep = train(cfg, ds);
    models.params.push_back(rep.final_params);
    const auto emb = embed_full(rep.final_params, ds);
    const auto probe = linear_probe(emb, ds.labels, ds.splits);
    if (probe.accuracy >= raw.accuracy + 0.15) ++wins;
    dg.add(probe.accuracy);
    dg.add(rep.loss_curve.back());
    char b[16];
    std::snprintf(b, sizeof(b), "%s%.3f", seed ? "," : "", probe.accuracy);
    accs += b;
  }
  models.ready = true;
  out.pass = wins >= 4;
  out.digest = dg.h;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "probe acc {%s} vs raw %.3f+0.15, %d/5 seeds pass",
                accs.c_str(), raw.accuracy, wins);
  out.detail = buf;
  return out;
}

Outcome criterion5(const TrainedModels& models) {
  Outcome out;
  if (!models.ready) {
    out.detail = "criterion 4 models unavailable";
    return out;
  }
  const Dataset& ds = models.dataset;
  Digest dg;
  int wins = 0;
  double min_trained = 1.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto random_params = init_params(Arch::GCN, {16, 128, 128}, seed + 100);
    double trained_mean = 0, random_mean = 0;
    Rng node_rng(seed, {0xace});
    for (std::size_t k = 0; k < 20; ++k) {
      const std::size_t node = node_rng.next_below(ds.graph.num_nodes);
      trained_mean +=
          stability_matrix(models.params[seed], ds, node, 0.3, 10, seed).mean_similarity;
      random_mean += stability_matrix(random_params, ds, node, 0.3, 10, seed).mean_similarity;
    }
    trained_mean /= 20.0;
    random_mean /= 20.0;
    if (trained_mean > random_mean && trained_mean >= 0.90) ++wins;
    min_trained = std::min(min_trained, trained_mean);
    dg.add(trained_mean);
    dg.add(random_mean);
  }
  out.pass = wins == 5;
  out.digest = dg.h;
  char buf[128];
  std::snprintf(buf, sizeof(buf), "trained > random-init in %d/5 seeds, min trained mean %.3f",
                wins, min_trained);
  out.detail = buf;
  return out;
}

// ---- criterion 6: sampling risk ------------------------------------------

Outcome criterion6() {
  Outcome out;
  Digest dg;
  bool ok = true;
  double prev = 2.0;
  std::string means;
  const std::size_t m = 99, draws = 10000;
  const std::size_t Ns[3] = {300, 1000, 10000};
  const std::size_t Ks[3] = {64, 256, 1024};
  for (int c = 0; c < 3; ++c) {
    const std::size_t N = Ns[c], K = Ks[c];
    std::set<std::size_t> similar;
    for (std::size_t i = 1; i <= m; ++i) similar.insert(i);
    double mean = 0;
    for (std::size_t t = 0; t < draws; ++t) {
      Rng rng(2026, {N, t});
      mean += sampling_risk(sample_negatives(0, N, K, rng).indices, similar);
    }
    mean /= double(draws);
    const double p = double(m) / double(N - 1);
    const double var = p * (1 - p) * double(N - 1 - K) / (double(K) * double(N - 2));
    ok = ok && std::fabs(mean - p) < 5.0 * std::sqrt(var / double(draws));
    ok = ok && mean < prev;
    prev = mean;
    dg.add(mean);
    char b[24];
    std::snprintf(b, sizeof(b), "%s%.4f", c ? "," : "", mean);
    means += b;
  }
  out.pass = ok;
  out.digest = dg.h;
  out.detail = "empirical means {" + means + "} match |M|/(N-1) within 5 sigma, decreasing in N";
  return out;
}

// ---- criterion 7: optional Pubmed reproduction ---------------------------

Outcome criterion7() {
  Outcome out;
  const char* dir = std::getenv("CGNN_PUBMED_DIR");
  if (!dir) {
    out.pass = true;
    out.detail = "SKIP (set CGNN_PUBMED_DIR to edges.txt/features.bin|csv/labels.txt dir)";
    return out;
  }
  const std::string d(dir);
  const auto ds = load_dataset(d + "/edges.txt", d + "/features.bin", d + "/labels.txt",
                               "files:" + d + "/train.txt," + d + "/val.txt," + d + "/test.txt",
                               0);
  double sum = 0;
  std::string accs;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    TrainConfig cfg;
    cfg.contrastive = {0.1, 1024, 0.3};
    cfg.lr = 0.001;
    cfg.iterations = 5000;
    cfg.arch = Arch::GCN;
    cfg.hidden_dim = 128;
    cfg.seed = seed;
    cfg.deterministic = false;
    const auto rep = train(cfg, ds);
    const auto probe = linear_probe(embed_full(rep.final_params, ds), ds.labels, ds.splits);
    sum += probe.accuracy;
    char b[16];
    std::snprintf(b, sizeof(b), "%s%.4f", seed ? "," : "", probe.accuracy);
    accs += b;
  }
  const double mean = sum / 5.0;
  out.pass = std::fabs(mean * 100.0 - 81.34) <= 2.5;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "mean accuracy %.2f%% {%s}, target 81.34 +/- 2.5", mean * 100.0,
                accs.c_str());
  out.detail = buf;
  return out;
}

}  // namespace

int main() {
  kernels::set_parallel(false);  // acceptance runs fully deterministic

  struct Row {
    const char* name;
    Outcome result;
  };
  TrainedModels models;
  std::vector<Row> rows;
  rows.push_back({"1 gradient correctness", criterion1()});
  rows.push_back({"2 loss-oracle equivalence", criterion2()});
  rows.push_back({"3 MI lower bound", criterion3()});
  rows.push_back({"4 end-to-end representation quality", criterion4(models)});
  rows.push_back({"5 stability under edge perturbation", criterion5(models)});
  rows.push_back({"6 sampling risk", criterion6()});
  rows.push_back({"7 Pubmed reproduction (optional)", criterion7()});

  // criterion 8: re-run 1-6 and require bitwise-identical digests
  {
    TrainedModels models2;
    const Outcome reruns[6] = {criterion1(), criterion2(),        criterion3(),
                               criterion4(models2), criterion5(models2), criterion6()};
    bool same = true;
    for (int i = 0; i < 6; ++i) same = same && reruns[i].digest == rows[i].result.digest;
    Outcome o;
    o.pass = same;
    o.detail = same ? "criteria 1-6 digests reproduce bitwise across two runs"
                    : "digest mismatch between runs";
    rows.push_back({"8 determinism", o});
  }

  bool all = true;
  for (const auto& r : rows) {
    all = all && r.result.pass;
    std::printf("%s criterion %s: %s\n", r.result.pass ? "PASS" : "FAIL", r.name,
                r.result.detail.c_str());
  }
  return all ? 0 : 1;
}
