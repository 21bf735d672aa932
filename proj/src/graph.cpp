#include "cgnn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "cgnn/errors.hpp"

namespace cgnn {

bool Graph::has_edge(std::size_t u, std::size_t v) const {
  const auto* beg = col_indices.data() + row_offsets[u];
  const auto* end = col_indices.data() + row_offsets[u + 1];
  return std::binary_search(beg, end, v);
}

Graph Graph::from_edges(std::size_t num_nodes,
                        const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  std::vector<std::vector<std::size_t>> adj(num_nodes);
  for (const auto& [u, v] : edges) {
    require(u < num_nodes && v < num_nodes, "edge endpoint out of range");
    adj[u].push_back(v);
    if (u != v) adj[v].push_back(u);
  }
  Graph g;
  g.num_nodes = num_nodes;
  g.row_offsets.assign(num_nodes + 1, 0);
  for (std::size_t u = 0; u < num_nodes; ++u) {
    auto& row = adj[u];
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
    g.row_offsets[u + 1] = g.row_offsets[u] + row.size();
    g.col_indices.insert(g.col_indices.end(), row.begin(), row.end());
  }
  std::size_t self_loops = 0;
  for (std::size_t u = 0; u < num_nodes; ++u)
    if (g.has_edge(u, u)) ++self_loops;
  g.num_undirected_edges = (g.col_indices.size() + self_loops) / 2;
  return g;
}

void Graph::validate() const {
  require(row_offsets.size() == num_nodes + 1, "row_offsets length");
  require(row_offsets.back() == col_indices.size(), "row_offsets terminal");
  for (std::size_t u = 0; u < num_nodes; ++u) {
    require(row_offsets[u] <= row_offsets[u + 1], "row_offsets monotone");
    for (std::size_t e = row_offsets[u]; e < row_offsets[u + 1]; ++e) {
      require(col_indices[e] < num_nodes, "col index range");
      if (e > row_offsets[u]) require(col_indices[e - 1] < col_indices[e], "row sorted/unique");
      require(has_edge(col_indices[e], u), "symmetry");
    }
  }
}

int Dataset::num_classes() const {
  int c = 0;
  for (int l : labels) c = std::max(c, l + 1);
  return c;
}

// --- I/O ----------------------------------------------------------------

static std::vector<std::pair<std::size_t, std::size_t>> parse_edge_file(const std::string& path,
                                                                        std::size_t* max_node) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open edge file: " + path);
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  std::string line;
  std::size_t lineno = 0;
  *max_node = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t pos = line.find_first_not_of(" \t\r");
    if (pos == std::string::npos || line[pos] == '#') continue;
    std::istringstream ls(line);
    long long u, v;
    if (!(ls >> u >> v) || u < 0 || v < 0)
      throw ParseError(path + ":" + std::to_string(lineno) + ": malformed edge line");
    edges.emplace_back(static_cast<std::size_t>(u), static_cast<std::size_t>(v));
    *max_node = std::max({*max_node, static_cast<std::size_t>(u), static_cast<std::size_t>(v)});
  }
  return edges;
}

Tensor<float> load_features(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open feature file: " + path);
  char magic[4] = {0, 0, 0, 0};
  in.read(magic, 4);
  if (in.gcount() == 4 && std::memcmp(magic, "CGF1", 4) == 0) {
    std::uint64_t n = 0, f = 0;
    in.read(reinterpret_cast<char*>(&n), 8);
    in.read(reinterpret_cast<char*>(&f), 8);
    if (!in) throw FormatError("feature file truncated header: " + path);
    Tensor<float> x(n, f);
    in.read(reinterpret_cast<char*>(x.v.data()), static_cast<std::streamsize>(n * f * 4));
    if (static_cast<std::uint64_t>(in.gcount()) != n * f * 4)
      throw FormatError("feature file truncated payload: " + path);
    return x;
  }
  // CSV fallback
  in.clear();
  in.seekg(0);
  std::vector<float> vals;
  std::size_t ncols = 0, lineno = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::size_t cols = 0;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      try {
        vals.push_back(std::stof(cell));
      } catch (const std::exception&) {
        throw ParseError(path + ":" + std::to_string(lineno) + ": bad feature value");
      }
      ++cols;
    }
    if (ncols == 0)
      ncols = cols;
    else if (cols != ncols)
      throw ParseError(path + ":" + std::to_string(lineno) + ": ragged feature row");
  }
  if (ncols == 0) throw FormatError("empty feature file: " + path);
  const std::size_t nrows = vals.size() / ncols;
  return Tensor<float>(nrows, ncols, std::move(vals));
}

std::vector<int> load_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open label file: " + path);
  std::vector<int> labels;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    try {
      labels.push_back(std::stoi(line));
    } catch (const std::exception&) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": bad label");
    }
  }
  return labels;
}

static std::vector<std::size_t> load_index_list(const std::string& path, std::size_t n) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open index file: " + path);
  std::vector<std::size_t> idx;
  long long x;
  while (in >> x) {
    if (x < 0 || static_cast<std::size_t>(x) >= n)
      throw ParseError(path + ": index out of range: " + std::to_string(x));
    idx.push_back(static_cast<std::size_t>(x));
  }
  return idx;
}

Splits make_per_class_splits(const std::vector<int>& labels, std::size_t train_per_class,
                             std::size_t val_per_class, std::uint64_t seed) {
  int num_classes = 0;
  for (int l : labels) num_classes = std::max(num_classes, l + 1);
  std::vector<std::vector<std::size_t>> by_class(num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] >= 0) by_class[labels[i]].push_back(i);

  Splits s;
  Rng rng(seed, {0x517u});
  for (auto& members : by_class) {
    // deterministic shuffle within class
    for (std::size_t i = members.size(); i > 1; --i)
      std::swap(members[i - 1], members[rng.next_below(i)]);
    for (std::size_t i = 0; i < members.size(); ++i) {
      if (i < train_per_class)
        s.train.push_back(members[i]);
      else if (i < train_per_class + val_per_class)
        s.val.push_back(members[i]);
      else
        s.test.push_back(members[i]);
    }
  }
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.val.begin(), s.val.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

Dataset load_dataset(const std::string& edge_path, const std::string& feature_path,
                     const std::string& label_path, const std::string& split_spec,
                     std::uint64_t split_seed) {
  std::size_t max_node = 0;
  auto edges = parse_edge_file(edge_path, &max_node);
  Dataset d;
  d.features = load_features(feature_path);
  d.labels = load_labels(label_path);
  const std::size_t n = d.features.rows;
  if (d.labels.size() != n)
    throw FormatError("feature/label count mismatch: " + std::to_string(n) + " vs " +
                      std::to_string(d.labels.size()));
  if (max_node >= n && !edges.empty())
    throw std::out_of_range("edge references node " + std::to_string(max_node) +
                            " but only " + std::to_string(n) + " feature rows");
  d.graph = Graph::from_edges(n, edges);

  if (split_spec.rfind("per-class:", 0) == 0) {
    std::size_t tr = 0, va = 0;
    if (std::sscanf(split_spec.c_str(), "per-class:%zu,%zu", &tr, &va) != 2)
      throw ParseError("bad split spec: " + split_spec);
    d.splits = make_per_class_splits(d.labels, tr, va, split_seed);
  } else if (split_spec.rfind("files:", 0) == 0) {
    std::string rest = split_spec.substr(6);
    std::istringstream ss(rest);
    std::string ftr, fva, fte;
    if (!std::getline(ss, ftr, ',') || !std::getline(ss, fva, ',') || !std::getline(ss, fte, ','))
      throw ParseError("bad split spec: " + split_spec);
    d.splits.train = load_index_list(ftr, n);
    d.splits.val = load_index_list(fva, n);
    d.splits.test = load_index_list(fte, n);
  } else {
    throw ParseError("unknown split spec: " + split_spec);
  }
  return d;
}

void save_edges(const Graph& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "# undirected edge list, one 'u v' per line\n";
  for (std::size_t u = 0; u < g.num_nodes; ++u)
    for (std::size_t e = g.row_offsets[u]; e < g.row_offsets[u + 1]; ++e)
      if (g.col_indices[e] >= u) out << u << " " << g.col_indices[e] << "\n";
}

void save_features(const Tensor<float>& x, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out.write("CGF1", 4);
  std::uint64_t n = x.rows, f = x.cols;
  out.write(reinterpret_cast<const char*>(&n), 8);
  out.write(reinterpret_cast<const char*>(&f), 8);
  out.write(reinterpret_cast<const char*>(x.v.data()), static_cast<std::streamsize>(x.v.size() * 4));
}

void save_labels(const std::vector<int>& labels, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  for (int l : labels) out << l << "\n";
}

void save_index_list(const std::vector<std::size_t>& idx, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  for (std::size_t i : idx) out << i << "\n";
}

// --- generation & perturbation ------------------------------------------

Dataset generate_sbm(std::size_t num_blocks, std::size_t nodes_per_block, double p_in, double p_out,
                     std::size_t feature_dim, double feature_noise, std::uint64_t seed) {
  require(num_blocks > 0 && nodes_per_block > 0, "sbm: counts must be positive");
  require(p_out >= 0 && p_in <= 1.0, "sbm: probabilities out of range");
  require(p_in > p_out, "sbm: p_in must exceed p_out");
  require(feature_dim >= num_blocks, "sbm: feature_dim must be >= num_blocks");

  const std::size_t n = num_blocks * nodes_per_block;
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  Rng edge_rng(seed, {1});
  for (std::size_t u = 0; u < n; ++u) {
    const std::size_t bu = u / nodes_per_block;
    for (std::size_t v = u + 1; v < n; ++v) {
      const double p = (bu == v / nodes_per_block) ? p_in : p_out;
      if (edge_rng.next_double() < p) edges.emplace_back(u, v);
    }
  }

  Dataset d;
  d.graph = Graph::from_edges(n, edges);
  d.features = Tensor<float>(n, feature_dim);
  Rng feat_rng(seed, {2});
  d.labels.resize(n);
  for (std::size_t u = 0; u < n; ++u) {
    const std::size_t bu = u / nodes_per_block;
    d.labels[u] = static_cast<int>(bu);
    // block means are orthogonal unit one-hots
    for (std::size_t j = 0; j < feature_dim; ++j) {
      const double mean = (j == bu) ? 1.0 : 0.0;
      d.features.at(u, j) = static_cast<float>(mean + feature_noise * feat_rng.next_gaussian());
    }
  }
  d.splits = make_per_class_splits(d.labels, 20, 30, mix_seed(seed, {3}));
  return d;
}

Graph add_self_loops(const Graph& g) {
  Graph out;
  out.num_nodes = g.num_nodes;
  out.row_offsets.assign(g.num_nodes + 1, 0);
  out.col_indices.reserve(g.col_indices.size() + g.num_nodes);
  std::size_t loops_present = 0;
  for (std::size_t u = 0; u < g.num_nodes; ++u) {
    bool inserted = false;
    for (std::size_t e = g.row_offsets[u]; e < g.row_offsets[u + 1]; ++e) {
      const std::size_t v = g.col_indices[e];
      if (!inserted && v >= u) {
        out.col_indices.push_back(u);
        inserted = true;
        if (v == u) {
          ++loops_present;
          continue;  // already had the loop; keep once
        }
      }
      out.col_indices.push_back(v);
    }
    if (!inserted) out.col_indices.push_back(u);
    out.row_offsets[u + 1] = out.col_indices.size();
  }
  out.num_undirected_edges = g.num_undirected_edges + (g.num_nodes - loops_present);
  return out;
}

std::vector<double> normalize_adjacency(const Graph& g) {
  std::vector<double> inv_sqrt_deg(g.num_nodes);
  for (std::size_t u = 0; u < g.num_nodes; ++u) {
    const std::size_t d = g.degree(u);  // includes the self-loop
    require(g.has_edge(u, u), "normalize_adjacency: missing self-loop");
    inv_sqrt_deg[u] = 1.0 / std::sqrt(static_cast<double>(d));
  }
  std::vector<double> values(g.col_indices.size());
  for (std::size_t u = 0; u < g.num_nodes; ++u)
    for (std::size_t e = g.row_offsets[u]; e < g.row_offsets[u + 1]; ++e)
      values[e] = inv_sqrt_deg[u] * inv_sqrt_deg[g.col_indices[e]];
  return values;
}

View drop_edges(const Graph& g, double rho, Rng& rng) {
  require(rho >= 0.0 && rho < 1.0, "drop_edges: rho must be in [0,1)");
  Graph kept;
  kept.num_nodes = g.num_nodes;
  kept.row_offsets.assign(g.num_nodes + 1, 0);
  // decide per undirected edge (u <= v); a map keyed by (u,v) is avoided by
  // drawing in canonical order and mirroring decisions through a second pass
  std::vector<char> keep(g.col_indices.size(), 0);
  std::vector<std::size_t> cursor(g.num_nodes);  // scan position into each row's lower half
  for (std::size_t u = 0; u < g.num_nodes; ++u) cursor[u] = g.row_offsets[u];
  for (std::size_t u = 0; u < g.num_nodes; ++u) {
    for (std::size_t e = g.row_offsets[u]; e < g.row_offsets[u + 1]; ++e) {
      const std::size_t v = g.col_indices[e];
      if (v < u) continue;
      const bool k = (v == u) || (rng.next_double() >= rho);  // self-loops never dropped
      keep[e] = k;
      if (v != u) {
        // mirror entry (v,u): rows are sorted, so it is the next lower-half
        // entry of row v not yet consumed
        while (g.col_indices[cursor[v]] != u) ++cursor[v];
        keep[cursor[v]] = k;
        ++cursor[v];
      }
    }
  }
  std::size_t kept_loops = 0, kept_directed = 0;
  for (std::size_t u = 0; u < g.num_nodes; ++u) {
    for (std::size_t e = g.row_offsets[u]; e < g.row_offsets[u + 1]; ++e)
      if (keep[e]) {
        kept.col_indices.push_back(g.col_indices[e]);
        ++kept_directed;
        if (g.col_indices[e] == u) ++kept_loops;
      }
    kept.row_offsets[u + 1] = kept.col_indices.size();
  }
  kept.num_undirected_edges = (kept_directed + kept_loops) / 2;

  View view;
  view.graph = add_self_loops(kept);
  view.norm_values = normalize_adjacency(view.graph);
  view.drop_ratio = rho;
  return view;
}

}  // namespace cgnn
