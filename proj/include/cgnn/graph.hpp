#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cgnn/rng.hpp"
#include "cgnn/tensor.hpp"

namespace cgnn {

// Undirected graph in CSR form. Both directed entries (u,v) and (v,u) are
// stored; neighbour lists are sorted ascending. Immutable after construction.
struct Graph {
  std::size_t num_nodes = 0;
  std::vector<std::size_t> row_offsets;  // length num_nodes + 1
  std::vector<std::size_t> col_indices;
  std::size_t num_undirected_edges = 0;  // self-loops count as one each

  std::size_t degree(std::size_t u) const { return row_offsets[u + 1] - row_offsets[u]; }
  bool has_edge(std::size_t u, std::size_t v) const;

  // Builds from undirected pairs; symmetrizes and deduplicates.
  static Graph from_edges(std::size_t num_nodes,
                          const std::vector<std::pair<std::size_t, std::size_t>>& edges);
  void validate() const;  // checks the CSR invariants, throws on violation
};

// A perturbed graph (self-loops added) plus its symmetric-normalized
// adjacency weights aligned with col_indices.
struct View {
  Graph graph;
  std::vector<double> norm_values;
  double drop_ratio = 0.0;
};

struct Splits {
  std::vector<std::size_t> train, val, test;
};

struct Dataset {
  Graph graph;
  Tensor<float> features;     // N x F
  std::vector<int> labels;    // length N, -1 = unlabeled
  Splits splits;
  int num_classes() const;
};

// --- I/O ----------------------------------------------------------------

// Edge list: one "u v" per line, '#' comments. Features: "CGF1" binary or
// CSV. Labels: one integer per line. split_spec: "per-class:20,30" or
// "files:train,val,test".
Dataset load_dataset(const std::string& edge_path, const std::string& feature_path,
                     const std::string& label_path, const std::string& split_spec,
                     std::uint64_t split_seed = 0);

Tensor<float> load_features(const std::string& path);
std::vector<int> load_labels(const std::string& path);

void save_edges(const Graph& g, const std::string& path);
void save_features(const Tensor<float>& x, const std::string& path);
void save_labels(const std::vector<int>& labels, const std::string& path);
void save_index_list(const std::vector<std::size_t>& idx, const std::string& path);

Splits make_per_class_splits(const std::vector<int>& labels, std::size_t train_per_class,
                             std::size_t val_per_class, std::uint64_t seed);

// --- generation & perturbation ------------------------------------------

Dataset generate_sbm(std::size_t num_blocks, std::size_t nodes_per_block, double p_in, double p_out,
                     std::size_t feature_dim, double feature_noise, std::uint64_t seed);

// Drops each undirected edge with probability rho (both directions together),
// then adds self-loops and recomputes normalization.
View drop_edges(const Graph& g, double rho, Rng& rng);

// D^{-1/2} (A+I) D^{-1/2} weights for a graph that already has self-loops.
std::vector<double> normalize_adjacency(const Graph& g_with_loops);

// g plus one self-loop per node (no-op entries already present are kept once).
Graph add_self_loops(const Graph& g);

}  // namespace cgnn
