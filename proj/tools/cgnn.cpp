// CGNN command line: dataset generation, contrastive training, evaluation,
// stability/risk diagnostics, and hyperparameter sweeps.

#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "cgnn/contrastive.hpp"
#include "cgnn/encoder.hpp"
#include "cgnn/errors.hpp"
#include "cgnn/eval.hpp"
#include "cgnn/graph.hpp"
#include "cgnn/kernels.hpp"
#include "cgnn/manifest.hpp"
#include "cgnn/trainer.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct DatasetArgs {
  std::string edges, features, labels;
  std::string splits = "per-class:20,30";
};

void add_dataset_flags(CLI::App* cmd, DatasetArgs& a) {
  cmd->add_option("--edges", a.edges, "edge list file")->required();
  cmd->add_option("--features", a.features, "feature file (CGF1 binary or CSV)")->required();
  cmd->add_option("--labels", a.labels, "label file")->required();
  cmd->add_option("--splits", a.splits, "split spec: per-class:T,V or files:tr,va,te");
}

cgnn::Dataset load(const DatasetArgs& a, std::uint64_t seed) {
  return cgnn::load_dataset(a.edges, a.features, a.labels, a.splits, seed);
}

cgnn::RunManifest start_manifest(const std::string& command,
                                 const std::map<std::string, std::string>& config,
                                 std::uint64_t seed, const std::string& out_dir,
                                 std::vector<std::string> outputs) {
  fs::create_directories(out_dir);
  cgnn::RunManifest m;
  m.command = command;
  m.config = config;
  m.seed = seed;
  m.build_id = cgnn::build_identifier();
  m.started_at = cgnn::current_timestamp();
  m.outputs = std::move(outputs);
  m.write(out_dir + "/manifest.json");
  return m;
}

void write_json(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw cgnn::IoError("cannot write " + path);
  out << j.dump(2) << "\n";
}

void write_matrix_csv(const cgnn::Tensor<float>& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw cgnn::IoError("cannot write " + path);
  for (std::size_t i = 0; i < m.rows; ++i) {
    for (std::size_t j = 0; j < m.cols; ++j) out << (j ? "," : "") << m.at(i, j);
    out << "\n";
  }
}

struct TrainFlags {
  std::string config_path;
  DatasetArgs data;
  cgnn::TrainConfig cfg;
  std::string out_dir = "out";
  std::string arch = "gcn";
  bool deterministic = false;
  bool have_rho = false, have_tau = false, have_k = false, have_lr = false, have_iters = false;
  double rho = 0.3, tau = 0.1, lr = 0.001;
  std::size_t k = 1024, iters = 5000;
};

void add_train_flags(CLI::App* cmd, TrainFlags& f) {
  cmd->add_option("--config", f.config_path, "key = value config file");
  add_dataset_flags(cmd, f.data);
  cmd->add_option("--arch", f.arch, "encoder: gcn or sage");
  cmd->add_flag("--deterministic", f.deterministic, "serial kernels, bitwise reproducible");
  cmd->add_option("--rho", f.rho, "edge drop ratio")->each([&](const std::string&) { f.have_rho = true; });
  cmd->add_option("--tau", f.tau, "temperature")->each([&](const std::string&) { f.have_tau = true; });
  cmd->add_option("--k", f.k, "negative sampling size")->each([&](const std::string&) { f.have_k = true; });
  cmd->add_option("--lr", f.lr, "learning rate")->each([&](const std::string&) { f.have_lr = true; });
  cmd->add_option("--iters", f.iters, "training iterations")->each([&](const std::string&) { f.have_iters = true; });
  cmd->add_option("--seed", f.cfg.seed, "random seed");
  cmd->add_option("--eval-every", f.cfg.eval_every, "probe the val split every N iterations");
  cmd->add_option("--hidden", f.cfg.hidden_dim, "hidden/output dimension");
  cmd->add_option("--out", f.out_dir, "output directory");
}

cgnn::TrainConfig resolve_train_config(TrainFlags& f) {
  cgnn::TrainConfig cfg = f.config_path.empty() ? cgnn::TrainConfig{} : cgnn::parse_config_file(f.config_path);
  cfg.seed = f.cfg.seed;
  if (f.cfg.eval_every) cfg.eval_every = f.cfg.eval_every;
  if (f.cfg.hidden_dim != 128) cfg.hidden_dim = f.cfg.hidden_dim;
  cfg.arch = cgnn::arch_from_string(f.arch);
  cfg.deterministic = f.deterministic;
  if (f.have_rho) cfg.contrastive.rho = f.rho;
  if (f.have_tau) cfg.contrastive.tau = f.tau;
  if (f.have_k) cfg.contrastive.K = f.k;
  if (f.have_lr) cfg.lr = f.lr;
  if (f.have_iters) cfg.iterations = f.iters;
  return cfg;
}

std::map<std::string, std::string> config_map(const cgnn::TrainConfig& c) {
  return {{"rho", std::to_string(c.contrastive.rho)},
          {"tau", std::to_string(c.contrastive.tau)},
          {"k", std::to_string(c.contrastive.K)},
          {"lr", std::to_string(c.lr)},
          {"iterations", std::to_string(c.iterations)},
          {"arch", cgnn::arch_to_string(c.arch)},
          {"hidden_dim", std::to_string(c.hidden_dim)},
          {"eval_every", std::to_string(c.eval_every)},
          {"deterministic", c.deterministic ? "1" : "0"}};
}

int run_train_once(const cgnn::TrainConfig& cfg, const cgnn::Dataset& ds,
                   const std::string& out_dir, double* out_val_acc, double* out_test_acc) {
  double best_val = -1.0;
  cgnn::EncoderParams best_params;
  auto hook = [&](std::size_t, const cgnn::EncoderParams& p, const std::vector<double>&) {
    const auto emb = cgnn::embed_full(p, ds);
    const auto probe = cgnn::linear_probe(emb, ds.labels, ds.splits);
    if (probe.val_accuracy > best_val) {
      best_val = probe.val_accuracy;
      best_params = p;
    }
  };
  const auto report = cgnn::train(cfg, ds, cfg.eval_every ? cgnn::EvalHook(hook) : cgnn::EvalHook{});
  if (best_val < 0) best_params = report.final_params;

  cgnn::save_checkpoint(report.final_params, out_dir + "/final.ckpt");
  cgnn::save_checkpoint(best_params, out_dir + "/best.ckpt");
  cgnn::write_curves_csv(report, out_dir + "/curves.csv");

  const auto emb = cgnn::embed_full(best_params, ds);
  const auto probe = cgnn::linear_probe(emb, ds.labels, ds.splits);
  json metrics;
  metrics["accuracy"] = probe.accuracy;
  metrics["silhouette"] = cgnn::silhouette(emb, ds.labels);
  metrics["loss_final"] = report.loss_curve.back();
  metrics["mi_bound_final"] = report.mi_bound_curve.back();
  metrics["wall_time_s"] = report.wall_time_s;
  write_json(metrics, out_dir + "/metrics.json");
  if (out_val_acc) *out_val_acc = probe.val_accuracy;
  if (out_test_acc) *out_test_acc = probe.accuracy;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CGNN: contrastive graph representation learning"};
  app.require_subcommand(1);
  cgnn::kernels::configure_threads_from_env();

  // generate
  auto* gen = app.add_subcommand("generate", "write a synthetic SBM dataset");
  std::size_t g_blocks = 3, g_per_block = 100, g_fdim = 16;
  double g_pin = 0.1, g_pout = 0.01, g_noise = 1.0;
  std::uint64_t g_seed = 7;
  std::string g_out = "data";
  gen->add_option("--blocks", g_blocks, "number of blocks");
  gen->add_option("--nodes-per-block", g_per_block, "nodes per block");
  gen->add_option("--p-in", g_pin, "intra-block edge probability");
  gen->add_option("--p-out", g_pout, "inter-block edge probability");
  gen->add_option("--feature-dim", g_fdim, "feature dimension");
  gen->add_option("--noise", g_noise, "feature noise std-dev");
  gen->add_option("--seed", g_seed, "random seed");
  gen->add_option("--out", g_out, "output directory");

  // train
  auto* tr = app.add_subcommand("train", "contrastive training");
  TrainFlags tf;
  add_train_flags(tr, tf);

  // eval
  auto* ev = app.add_subcommand("eval", "linear probe + silhouette on a checkpoint");
  DatasetArgs e_data;
  std::string e_ckpt, e_out = "out";
  bool e_raw = false;
  std::uint64_t e_seed = 0;
  ev->add_option("--checkpoint", e_ckpt, "trained checkpoint");
  add_dataset_flags(ev, e_data);
  ev->add_flag("--raw-features", e_raw, "probe raw features instead of embeddings");
  ev->add_option("--seed", e_seed, "split seed");
  ev->add_option("--out", e_out, "output directory");

  // stability
  auto* st = app.add_subcommand("stability", "perturbation cosine-similarity matrices");
  DatasetArgs s_data;
  std::string s_ckpt, s_out = "out";
  std::vector<std::size_t> s_nodes;
  std::size_t s_sample = 0, s_trials = 10;
  double s_rho = 0.3;
  std::uint64_t s_seed = 0;
  st->add_option("--checkpoint", s_ckpt, "trained checkpoint")->required();
  add_dataset_flags(st, s_data);
  st->add_option("--nodes", s_nodes, "node ids to probe");
  st->add_option("--sample", s_sample, "sample this many test nodes instead");
  st->add_option("--rho", s_rho, "drop ratio");
  st->add_option("--trials", s_trials, "number of perturbations");
  st->add_option("--seed", s_seed, "random seed");
  st->add_option("--out", s_out, "output directory");

  // risk
  auto* rk = app.add_subcommand("risk", "negative-sampling risk diagnostics");
  DatasetArgs r_data;
  std::string r_ckpt, r_out = "out";
  std::size_t r_k = 64, r_draws = 10000, r_anchors = 20;
  double r_threshold = -2.0;  // <-1 means label mode
  std::uint64_t r_seed = 0;
  add_dataset_flags(rk, r_data);
  rk->add_option("--checkpoint", r_ckpt, "checkpoint (cosine mode)");
  rk->add_option("--threshold", r_threshold, "cosine cutoff; omit for label mode");
  rk->add_option("--k", r_k, "sampling size");
  rk->add_option("--draws", r_draws, "number of sampling trials");
  rk->add_option("--anchors", r_anchors, "number of sampled anchors");
  rk->add_option("--seed", r_seed, "random seed");
  rk->add_option("--out", r_out, "output directory");

  // sweep
  auto* sw = app.add_subcommand("sweep", "grid sweep over rho, tau or k");
  TrainFlags wf;
  add_train_flags(sw, wf);
  std::string w_param = "rho";
  std::vector<double> w_values;
  sw->add_option("--param", w_param, "swept parameter: rho, tau or k")->required();
  sw->add_option("--values", w_values, "grid values")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      start_manifest("generate",
                     {{"blocks", std::to_string(g_blocks)},
                      {"nodes_per_block", std::to_string(g_per_block)},
                      {"p_in", std::to_string(g_pin)},
                      {"p_out", std::to_string(g_pout)},
                      {"feature_dim", std::to_string(g_fdim)},
                      {"noise", std::to_string(g_noise)}},
                     g_seed, g_out,
                     {"edges.txt", "features.bin", "labels.txt", "train.txt", "val.txt",
                      "test.txt"});
      const auto ds = cgnn::generate_sbm(g_blocks, g_per_block, g_pin, g_pout, g_fdim, g_noise,
                                         g_seed);
      cgnn::save_edges(ds.graph, g_out + "/edges.txt");
      cgnn::save_features(ds.features, g_out + "/features.bin");
      cgnn::save_labels(ds.labels, g_out + "/labels.txt");
      cgnn::save_index_list(ds.splits.train, g_out + "/train.txt");
      cgnn::save_index_list(ds.splits.val, g_out + "/val.txt");
      cgnn::save_index_list(ds.splits.test, g_out + "/test.txt");
      std::cout << "wrote SBM dataset (" << ds.graph.num_nodes << " nodes, "
                << ds.graph.num_undirected_edges << " edges) to " << g_out << "\n";
    } else if (*tr) {
      auto cfg = resolve_train_config(tf);
      if (!cfg.deterministic) cgnn::kernels::set_parallel(true);
      start_manifest("train", config_map(cfg), cfg.seed, tf.out_dir,
                     {"final.ckpt", "best.ckpt", "curves.csv", "metrics.json"});
      const auto ds = load(tf.data, cfg.seed);
      run_train_once(cfg, ds, tf.out_dir, nullptr, nullptr);
      std::cout << "training complete; metrics in " << tf.out_dir << "/metrics.json\n";
    } else if (*ev) {
      start_manifest("eval", {{"raw_features", e_raw ? "1" : "0"}}, e_seed, e_out,
                     {"metrics.json"});
      const auto ds = load(e_data, e_seed);
      cgnn::Tensor<float> emb;
      if (e_raw) {
        emb = ds.features;
      } else {
        if (e_ckpt.empty()) throw cgnn::ParseError("--checkpoint required unless --raw-features");
        emb = cgnn::embed_full(cgnn::load_checkpoint(e_ckpt), ds);
      }
      const auto probe = cgnn::linear_probe(emb, ds.labels, ds.splits);
      json metrics;
      metrics["accuracy"] = probe.accuracy;
      metrics["val_accuracy"] = probe.val_accuracy;
      metrics["per_class_accuracy"] = probe.per_class_accuracy;
      metrics["silhouette"] = cgnn::silhouette(emb, ds.labels);
      write_json(metrics, e_out + "/metrics.json");
      std::cout << "test accuracy " << probe.accuracy << "; metrics in " << e_out
                << "/metrics.json\n";
    } else if (*st) {
      start_manifest("stability",
                     {{"rho", std::to_string(s_rho)}, {"trials", std::to_string(s_trials)}},
                     s_seed, s_out, {"stability.json"});
      const auto ds = load(s_data, s_seed);
      const auto params = cgnn::load_checkpoint(s_ckpt);
      if (s_sample > 0) {
        cgnn::Rng rng(s_seed, {0xa11});
        const auto& test = ds.splits.test;
        for (std::size_t i = 0; i < s_sample; ++i)
          s_nodes.push_back(test.empty() ? rng.next_below(ds.graph.num_nodes)
                                         : test[rng.next_below(test.size())]);
      }
      if (s_nodes.empty()) throw cgnn::ParseError("need --nodes or --sample");
      json j;
      double total = 0;
      for (std::size_t node : s_nodes) {
        const auto rep = cgnn::stability_matrix(params, ds, node, s_rho, s_trials, s_seed);
        write_matrix_csv(rep.similarity_matrix,
                         s_out + "/stability_" + std::to_string(node) + ".csv");
        j["nodes"].push_back({{"node", node}, {"mean_similarity", rep.mean_similarity}});
        total += rep.mean_similarity;
      }
      j["mean_similarity"] = total / double(s_nodes.size());
      write_json(j, s_out + "/stability.json");
      std::cout << "mean stability " << j["mean_similarity"] << "; report in " << s_out << "\n";
    } else if (*rk) {
      start_manifest("risk", {{"k", std::to_string(r_k)}, {"draws", std::to_string(r_draws)}},
                     r_seed, r_out, {"risk.json"});
      const auto ds = load(r_data, r_seed);
      const std::size_t n = ds.graph.num_nodes;
      cgnn::Tensor<float> emb;
      const bool cosine_mode = r_threshold >= -1.0;
      if (cosine_mode) {
        if (r_ckpt.empty()) throw cgnn::ParseError("cosine mode needs --checkpoint");
        emb = cgnn::embed_full(cgnn::load_checkpoint(r_ckpt), ds);
      }
      cgnn::Rng anchor_rng(r_seed, {0x11f});
      json j;
      double grand = 0;
      for (std::size_t a = 0; a < r_anchors; ++a) {
        const std::size_t anchor = anchor_rng.next_below(n);
        const auto similar = cosine_mode
                                 ? cgnn::similar_set_by_cosine(emb, anchor, r_threshold)
                                 : cgnn::similar_set_by_label(ds.labels, anchor);
        double mean_risk = 0, mean_overlap = 0;
        const std::size_t per_anchor = std::max<std::size_t>(1, r_draws / r_anchors);
        for (std::size_t t = 0; t < per_anchor; ++t) {
          cgnn::Rng rng(r_seed, {0x9e6, a, t});
          const auto ns = cgnn::sample_negatives(anchor, n, r_k, rng);
          const double risk = cgnn::sampling_risk(ns.indices, similar);
          mean_risk += risk;
          mean_overlap += risk * double(r_k);
        }
        mean_risk /= double(per_anchor);
        mean_overlap /= double(per_anchor);
        grand += mean_risk;
        j["anchors"].push_back(
            {{"anchor", anchor}, {"K", r_k}, {"overlap", mean_overlap}, {"risk", mean_risk}});
      }
      j["mean_risk"] = grand / double(r_anchors);
      write_json(j, r_out + "/risk.json");
      std::cout << "mean sampling risk " << j["mean_risk"] << "; report in " << r_out << "\n";
    } else if (*sw) {
      auto base = resolve_train_config(wf);
      if (!base.deterministic) cgnn::kernels::set_parallel(true);
      auto cmap = config_map(base);
      cmap["sweep_param"] = w_param;
      start_manifest("sweep", cmap, base.seed, wf.out_dir, {"sweep.csv"});
      const auto ds = load(wf.data, base.seed);
      std::ofstream csv(wf.out_dir + "/sweep.csv");
      csv << w_param << ",val_accuracy,test_accuracy\n";
      for (std::size_t i = 0; i < w_values.size(); ++i) {
        auto cfg = base;
        if (w_param == "rho")
          cfg.contrastive.rho = w_values[i];
        else if (w_param == "tau")
          cfg.contrastive.tau = w_values[i];
        else if (w_param == "k")
          cfg.contrastive.K = static_cast<std::size_t>(w_values[i]);
        else
          throw cgnn::ParseError("unknown sweep param: " + w_param);
        cfg.seed = cgnn::mix_seed(base.seed, {0x53ee, i});
        const std::string sub = wf.out_dir + "/point_" + std::to_string(i);
        fs::create_directories(sub);
        double val = 0, test = 0;
        run_train_once(cfg, ds, sub, &val, &test);
        csv << w_values[i] << "," << val << "," << test << "\n";
        csv.flush();
      }
      std::cout << "sweep complete; results in " << wf.out_dir << "/sweep.csv\n";
    }
  } catch (const cgnn::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
