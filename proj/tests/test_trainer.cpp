#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <fstream>

#include "cgnn/eval.hpp"
#include "cgnn/trainer.hpp"
#include "doctest.h"

using namespace cgnn;

namespace {

std::string tmp_path(const char* name) { return std::string("/tmp/cgnn_trainer_") + name; }

// independent transcription of the NCE objective (see also test_contrastive)
double oracle_nce(const Tensor<float>& z1, const Tensor<float>& z2, const Tensor<float>& bank1,
                  const Tensor<float>& bank2, const std::vector<NegativeSample>& negs, double tau,
                  std::size_t K, std::size_t N) {
  const double pn = double(K) / double(N);
  auto h = [&](const Tensor<float>& a, std::size_t i, const Tensor<float>& b, std::size_t j) {
    double dot = 0;
    for (std::size_t c = 0; c < a.cols; ++c) dot += double(a.at(i, c)) * b.at(j, c);
    return std::exp(dot / tau);
  };
  double total = 0;
  for (int dir = 0; dir < 2; ++dir) {
    const auto& a = dir == 0 ? z1 : z2;
    const auto& b = dir == 0 ? z2 : z1;
    const auto& bank = dir == 0 ? bank2 : bank1;
    double acc = 0;
    for (std::size_t i = 0; i < a.rows; ++i) {
      const double hp = h(a, i, b, i);
      double term = std::log(hp / (hp + pn));
      for (std::size_t j : negs[i].indices) {
        const double hn = h(a, i, bank, j);
        term += std::log(1.0 - hn / (hn + pn));
      }
      acc += term;
    }
    total += -acc / double(a.rows);
  }
  return total;
}

}  // namespace

TEST_CASE("adam single step closed forms") {
  SUBCASE("unit gradient at t=1 moves by almost exactly -lr") {
    Tensor<float> w(1, 1, 0.0f), g(1, 1, 1.0f);
    auto state = AdamState::like({&w});
    adam_step({&w}, {&g}, state, 0.01, 1);
    // mhat = ghat = 1 after bias correction, so update = -lr / (1 + eps)
    CHECK(w.v[0] == doctest::Approx(-0.01).epsilon(1e-6));
  }
  SUBCASE("zero gradient gives zero update") {
    Tensor<float> w(2, 2, 3.5f), g(2, 2, 0.0f);
    auto state = AdamState::like({&w});
    adam_step({&w}, {&g}, state, 0.1, 1);
    for (float v : w.v) CHECK(v == 3.5f);
  }
}

TEST_CASE("adam matches the hand recurrence over 3 steps") {
  // scalar trajectory with gradients g_t; oracle applies the textbook
  // recurrence, rounding to float at each state write like the implementation
  const double lr = 0.05, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  const double gs[3] = {1.0, -0.5, 2.0};
  float ow = 0.2f, om = 0.0f, ov = 0.0f;
  for (int t = 1; t <= 3; ++t) {
    const double g = gs[t - 1];
    om = float(b1 * om + (1 - b1) * g);
    ov = float(b2 * ov + (1 - b2) * g * g);
    const double mhat = om / (1 - std::pow(b1, t));
    const double vhat = ov / (1 - std::pow(b2, t));
    ow = float(ow - lr * mhat / (std::sqrt(vhat) + eps));
  }

  Tensor<float> w(1, 1, 0.2f);
  auto state = AdamState::like({&w});
  for (int t = 1; t <= 3; ++t) {
    Tensor<float> g(1, 1, float(gs[t - 1]));
    adam_step({&w}, {&g}, state, lr, t);
  }
  CHECK(std::fabs(double(w.v[0]) - ow) < 1e-10);
}

TEST_CASE("checkpoint round trip is bitwise") {
  const auto p = init_params(Arch::SAGE_MEAN, {7, 5, 5}, 123);
  const auto path = tmp_path("ckpt.bin");
  save_checkpoint(p, path);
  const auto q = load_checkpoint(path);
  CHECK(q.arch == p.arch);
  CHECK(q.dims.in == 7);
  CHECK(q.dims.hidden == 5);
  REQUIRE(q.weights.size() == p.weights.size());
  for (std::size_t i = 0; i < p.weights.size(); ++i) CHECK(q.weights[i].v == p.weights[i].v);
  for (std::size_t i = 0; i < p.biases.size(); ++i) CHECK(q.biases[i].v == p.biases[i].v);

  SUBCASE("truncated file is rejected") {
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), {});
    const auto tpath = tmp_path("ckpt_trunc.bin");
    std::ofstream(tpath, std::ios::binary) << bytes.substr(0, bytes.size() / 2);
    CHECK_THROWS_AS(load_checkpoint(tpath), FormatError);
  }
  SUBCASE("wrong magic is rejected") {
    const auto bpath = tmp_path("ckpt_magic.bin");
    std::ofstream(bpath, std::ios::binary) << "NOPE" << std::string(64, '\0');
    CHECK_THROWS_AS(load_checkpoint(bpath), FormatError);
  }
}

TEST_CASE("config file parsing") {
  const auto path = tmp_path("config.txt");
  std::ofstream(path) << "# a comment\n"
                         "rho = 0.4\n"
                         "tau=0.2  # trailing comment\n"
                         "k = 64\n"
                         "arch = sage\n"
                         "iterations = 12\n"
                         "\n";
  const auto cfg = parse_config_file(path);
  CHECK(cfg.contrastive.rho == doctest::Approx(0.4));
  CHECK(cfg.contrastive.tau == doctest::Approx(0.2));
  CHECK(cfg.contrastive.K == 64);
  CHECK(cfg.arch == Arch::SAGE_MEAN);
  CHECK(cfg.iterations == 12);
  CHECK(cfg.lr == doctest::Approx(0.001));  // untouched default

  TrainConfig c;
  CHECK_THROWS_AS(apply_config_kv(c, "bogus", "1"), ParseError);
  CHECK_THROWS_AS(apply_config_kv(c, "rho", "abc"), ParseError);
  CHECK_THROWS_AS(parse_config_file("/nonexistent/cfg"), IoError);

  const auto badpath = tmp_path("config_bad.txt");
  std::ofstream(badpath) << "rho 0.4\n";
  CHECK_THROWS_AS(parse_config_file(badpath), ParseError);
}

TEST_CASE("config validation rejects out-of-range values") {
  TrainConfig cfg;
  cfg.contrastive.K = 16;
  cfg.iterations = 1;
  cfg.lr = -1.0;
  CHECK_THROWS_AS(cfg.validate(100), std::invalid_argument);
  cfg.lr = 0.001;
  cfg.contrastive.rho = 1.0;
  CHECK_THROWS_AS(cfg.validate(100), std::invalid_argument);
  cfg.contrastive.rho = 0.3;
  cfg.contrastive.K = 100;  // must be <= N-1
  CHECK_THROWS_AS(cfg.validate(100), std::invalid_argument);
}

TEST_CASE("a single training iteration produces finite curves") {
  const Dataset d = generate_sbm(2, 20, 0.3, 0.05, 4, 1.0, 11);
  TrainConfig cfg;
  cfg.iterations = 1;
  cfg.hidden_dim = 8;
  cfg.contrastive.K = 5;
  const auto rep = train(cfg, d);
  REQUIRE(rep.loss_curve.size() == 1);
  REQUIRE(rep.mi_bound_curve.size() == 1);
  CHECK(std::isfinite(rep.loss_curve[0]));
  CHECK(rep.mi_bound_curve[0] ==
        doctest::Approx(std::log(5.0) - 0.5 * rep.loss_curve[0]).epsilon(1e-12));
  CHECK(rep.wall_time_s > 0.0);
}

TEST_CASE("first-iteration loss matches an independent reconstruction at rho=0") {
  const Dataset d = generate_sbm(2, 15, 0.4, 0.1, 4, 1.0, 21);
  const std::size_t n = d.graph.num_nodes, K = 6;
  TrainConfig cfg;
  cfg.iterations = 1;
  cfg.hidden_dim = 8;
  cfg.contrastive.rho = 0.0;
  cfg.contrastive.K = K;
  cfg.contrastive.tau = 0.5;
  cfg.seed = 33;
  const auto rep = train(cfg, d);

  // with rho=0 both views equal the full graph, the bank is seeded with the
  // initial embeddings, so iteration 0 is fully reconstructible from parts
  const auto params = init_params(cfg.arch, {4, 8, 8}, cfg.seed);
  const auto z = embed_full(params, d);
  const auto negs = sample_all_negatives(n, K, cfg.seed, 0);
  const double expect = oracle_nce(z, z, z, z, negs, 0.5, K, n);
  CHECK(rep.loss_curve[0] == doctest::Approx(expect).epsilon(1e-4));
}

TEST_CASE("training is deterministic: identical runs are bitwise identical") {
  const Dataset d = generate_sbm(2, 25, 0.3, 0.05, 4, 1.0, 9);
  TrainConfig cfg;
  cfg.iterations = 10;
  cfg.hidden_dim = 8;
  cfg.contrastive.K = 8;
  cfg.seed = 5;
  const auto a = train(cfg, d);
  const auto b = train(cfg, d);
  CHECK(a.loss_curve == b.loss_curve);
  for (std::size_t i = 0; i < a.final_params.weights.size(); ++i)
    CHECK(a.final_params.weights[i].v == b.final_params.weights[i].v);
  for (std::size_t i = 0; i < a.final_params.biases.size(); ++i)
    CHECK(a.final_params.biases[i].v == b.final_params.biases[i].v);
}

TEST_CASE("different seeds give different trajectories") {
  const Dataset d = generate_sbm(2, 25, 0.3, 0.05, 4, 1.0, 9);
  TrainConfig cfg;
  cfg.iterations = 3;
  cfg.hidden_dim = 8;
  cfg.contrastive.K = 8;
  cfg.seed = 5;
  const auto a = train(cfg, d);
  cfg.seed = 6;
  const auto b = train(cfg, d);
  CHECK(a.loss_curve != b.loss_curve);
}

TEST_CASE("loss trends down on an SBM") {
  const Dataset d = generate_sbm(3, 100, 0.1, 0.01, 16, 1.0, 7);
  TrainConfig cfg;
  cfg.iterations = 300;
  cfg.hidden_dim = 32;
  cfg.contrastive.K = 128;
  cfg.contrastive.tau = 0.1;
  cfg.contrastive.rho = 0.3;
  cfg.seed = 1;
  const auto rep = train(cfg, d);
  double head = 0, tail = 0;
  for (std::size_t i = 0; i < 10; ++i) {
    head += rep.loss_curve[i];
    tail += rep.loss_curve[rep.loss_curve.size() - 1 - i];
  }
  CHECK(tail / 10.0 < head / 10.0);
  for (double l : rep.loss_curve) CHECK(std::isfinite(l));
}

TEST_CASE("losses stay finite across seeds and both architectures") {
  const Dataset d = generate_sbm(2, 30, 0.3, 0.05, 4, 1.0, 2);
  for (Arch arch : {Arch::GCN, Arch::SAGE_MEAN}) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      TrainConfig cfg;
      cfg.iterations = 15;
      cfg.hidden_dim = 8;
      cfg.contrastive.K = 10;
      cfg.arch = arch;
      cfg.seed = seed;
      const auto rep = train(cfg, d);
      for (double l : rep.loss_curve) CHECK(std::isfinite(l));
    }
  }
}

TEST_CASE("eval hook fires on schedule and at the final iteration") {
  const Dataset d = generate_sbm(2, 20, 0.3, 0.05, 4, 1.0, 3);
  TrainConfig cfg;
  cfg.iterations = 7;
  cfg.hidden_dim = 8;
  cfg.contrastive.K = 5;
  cfg.eval_every = 3;
  std::vector<std::size_t> fired;
  train(cfg, d, [&](std::size_t it, const EncoderParams&, const std::vector<double>& curve) {
    fired.push_back(it);
    CHECK(curve.size() == it);
  });
  CHECK(fired == std::vector<std::size_t>{3, 6, 7});
}

TEST_CASE("curves csv round trip") {
  TrainReport rep;
  rep.loss_curve = {1.5, 1.25};
  rep.mi_bound_curve = {0.1, 0.35};
  const auto path = tmp_path("curves.csv");
  write_curves_csv(rep, path);
  std::ifstream in(path);
  std::string l0, l1, l2;
  std::getline(in, l0);
  std::getline(in, l1);
  std::getline(in, l2);
  CHECK(l0 == "iteration,loss,mi_bound");
  CHECK(l1 == "0,1.5,0.1");
  CHECK(l2 == "1,1.25,0.35");
}
