#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "cgnn/graph.hpp"
#include "cgnn/kernels.hpp"
#include "cgnn/tensor.hpp"

namespace cgnn {

// Single-threaded reverse-mode tape scoped to the fixed set of operations the
// encoders and losses need. Nodes are recorded in topological order; backward
// replays them in exact reverse order, accumulating (+=) into input grads so
// shared inputs receive the sum of all path gradients.
template <class T>
class Tape {
 public:
  using Id = int;

  Id input(Tensor<T> value, bool requires_grad) {
    nodes_.push_back({std::move(value), Tensor<T>{}, requires_grad});
    Node& n = nodes_.back();
    n.grad = Tensor<T>(n.value.rows, n.value.cols, T(0));
    return static_cast<Id>(nodes_.size() - 1);
  }

  Id constant(Tensor<T> value) { return input(std::move(value), false); }

  const Tensor<T>& val(Id id) const { return nodes_[id].value; }
  Tensor<T>& val_mut(Id id) { return nodes_[id].value; }
  const Tensor<T>& grad(Id id) const { return nodes_[id].grad; }
  bool requires_grad(Id id) const { return nodes_[id].requires_grad; }

  // --- primitives -------------------------------------------------------

  Id matmul(Id a, Id b) {
    const auto& A = val(a);
    const auto& B = val(b);
    require(A.cols == B.rows, "matmul: inner dimensions differ");
    Tensor<T> C(A.rows, B.cols);
    kernels::matmul_nn(A.v.data(), B.v.data(), C.v.data(), A.rows, A.cols, B.cols);
    Id out = make_node(std::move(C), needs(a) || needs(b));
    record([a, b, out](Tape& t) {
      const auto& G = t.nodes_[out].grad;
      const auto& A = t.val(a);
      const auto& B = t.val(b);
      if (t.needs(a))
        kernels::matmul_nt(G.v.data(), B.v.data(), t.nodes_[a].grad.v.data(), G.rows, G.cols,
                           B.rows, /*accumulate=*/true);
      if (t.needs(b))
        kernels::matmul_tn(A.v.data(), G.v.data(), t.nodes_[b].grad.v.data(), A.cols, A.rows,
                           G.cols, /*accumulate=*/true);
    });
    return out;
  }

  // y = S x with the view's normalized adjacency; S is symmetric, so the
  // backward pass reuses the same matrix.
  Id spmm(const View& view, Id x) {
    const auto& X = val(x);
    require(view.graph.num_nodes == X.rows, "spmm: node count mismatch");
    Tensor<T> Y(X.rows, X.cols);
    kernels::spmm(view.graph.row_offsets.data(), view.graph.col_indices.data(),
                  view.norm_values.data(), X.v.data(), Y.v.data(), X.rows, X.cols);
    Id out = make_node(std::move(Y), needs(x));
    const View* vp = &view;
    record([vp, x, out](Tape& t) {
      if (!t.needs(x)) return;
      const auto& G = t.nodes_[out].grad;
      kernels::spmm(vp->graph.row_offsets.data(), vp->graph.col_indices.data(),
                    vp->norm_values.data(), G.v.data(), t.nodes_[x].grad.v.data(), G.rows, G.cols,
                    /*accumulate=*/true);
    });
    return out;
  }

  // y_i = mean over post-drop neighbours j != i (empty neighbourhood -> 0)
  Id neighbour_mean(const View& view, Id x) {
    const auto& X = val(x);
    const Graph& g = view.graph;
    require(g.num_nodes == X.rows, "neighbour_mean: node count mismatch");
    Tensor<T> Y(X.rows, X.cols, T(0));
    std::vector<T> inv_count(g.num_nodes, T(0));
    for (std::size_t i = 0; i < g.num_nodes; ++i) {
      std::size_t cnt = 0;
      for (std::size_t e = g.row_offsets[i]; e < g.row_offsets[i + 1]; ++e)
        if (g.col_indices[e] != i) ++cnt;
      if (cnt == 0) continue;
      inv_count[i] = T(1) / static_cast<T>(cnt);
      for (std::size_t e = g.row_offsets[i]; e < g.row_offsets[i + 1]; ++e) {
        const std::size_t j = g.col_indices[e];
        if (j == i) continue;
        for (std::size_t c = 0; c < X.cols; ++c) Y.at(i, c) += X.at(j, c);
      }
      for (std::size_t c = 0; c < X.cols; ++c) Y.at(i, c) *= inv_count[i];
    }
    Id out = make_node(std::move(Y), needs(x));
    const View* vp = &view;
    record([vp, x, out, inv_count](Tape& t) {
      if (!t.needs(x)) return;
      const Graph& g = vp->graph;
      const auto& G = t.nodes_[out].grad;
      auto& DX = t.nodes_[x].grad;
      // symmetric structure: j in N(i) iff i in N(j)
      for (std::size_t j = 0; j < g.num_nodes; ++j)
        for (std::size_t e = g.row_offsets[j]; e < g.row_offsets[j + 1]; ++e) {
          const std::size_t i = g.col_indices[e];
          if (i == j) continue;
          for (std::size_t c = 0; c < G.cols; ++c) DX.at(j, c) += G.at(i, c) * inv_count[i];
        }
    });
    return out;
  }

  Id add(Id a, Id b) {
    const auto& A = val(a);
    const auto& B = val(b);
    require(A.same_shape(B), "add: shape mismatch");
    Tensor<T> Y = A;
    for (std::size_t i = 0; i < Y.size(); ++i) Y.v[i] += B.v[i];
    Id out = make_node(std::move(Y), needs(a) || needs(b));
    record([a, b, out](Tape& t) {
      const auto& G = t.nodes_[out].grad;
      if (t.needs(a))
        for (std::size_t i = 0; i < G.size(); ++i) t.nodes_[a].grad.v[i] += G.v[i];
      if (t.needs(b))
        for (std::size_t i = 0; i < G.size(); ++i) t.nodes_[b].grad.v[i] += G.v[i];
    });
    return out;
  }

  // x (N x d) plus a row bias b (1 x d)
  Id add_bias(Id x, Id b) {
    const auto& X = val(x);
    const auto& B = val(b);
    require(B.rows == 1 && B.cols == X.cols, "add_bias: bias must be 1 x cols");
    Tensor<T> Y = X;
    for (std::size_t i = 0; i < X.rows; ++i)
      for (std::size_t j = 0; j < X.cols; ++j) Y.at(i, j) += B.at(0, j);
    Id out = make_node(std::move(Y), needs(x) || needs(b));
    record([x, b, out](Tape& t) {
      const auto& G = t.nodes_[out].grad;
      if (t.needs(x))
        for (std::size_t i = 0; i < G.size(); ++i) t.nodes_[x].grad.v[i] += G.v[i];
      if (t.needs(b))
        for (std::size_t i = 0; i < G.rows; ++i)
          for (std::size_t j = 0; j < G.cols; ++j) t.nodes_[b].grad.at(0, j) += G.at(i, j);
    });
    return out;
  }

  Id relu(Id x) {
    const auto& X = val(x);
    Tensor<T> Y = X;
    for (auto& v : Y.v) v = v > T(0) ? v : T(0);
    Id out = make_node(std::move(Y), needs(x));
    record([x, out](Tape& t) {
      if (!t.needs(x)) return;
      const auto& G = t.nodes_[out].grad;
      const auto& X = t.val(x);
      for (std::size_t i = 0; i < G.size(); ++i)
        if (X.v[i] > T(0)) t.nodes_[x].grad.v[i] += G.v[i];  // subgradient 0 at the kink
    });
    return out;
  }

  Id scale(Id x, T c) {
    const auto& X = val(x);
    Tensor<T> Y = X;
    for (auto& v : Y.v) v *= c;
    Id out = make_node(std::move(Y), needs(x));
    record([x, out, c](Tape& t) {
      if (!t.needs(x)) return;
      const auto& G = t.nodes_[out].grad;
      for (std::size_t i = 0; i < G.size(); ++i) t.nodes_[x].grad.v[i] += c * G.v[i];
    });
    return out;
  }

  Id mul(Id a, Id b) {
    const auto& A = val(a);
    const auto& B = val(b);
    require(A.same_shape(B), "mul: shape mismatch");
    Tensor<T> Y = A;
    for (std::size_t i = 0; i < Y.size(); ++i) Y.v[i] *= B.v[i];
    Id out = make_node(std::move(Y), needs(a) || needs(b));
    record([a, b, out](Tape& t) {
      const auto& G = t.nodes_[out].grad;
      const auto& A = t.val(a);
      const auto& B = t.val(b);
      if (t.needs(a))
        for (std::size_t i = 0; i < G.size(); ++i) t.nodes_[a].grad.v[i] += G.v[i] * B.v[i];
      if (t.needs(b))
        for (std::size_t i = 0; i < G.size(); ++i) t.nodes_[b].grad.v[i] += G.v[i] * A.v[i];
    });
    return out;
  }

  Id exp(Id x) {
    const auto& X = val(x);
    Tensor<T> Y = X;
    for (auto& v : Y.v) v = std::exp(v);
    Id out = make_node(std::move(Y), needs(x));
    record([x, out](Tape& t) {
      if (!t.needs(x)) return;
      const auto& G = t.nodes_[out].grad;
      const auto& Y = t.val(out);
      for (std::size_t i = 0; i < G.size(); ++i) t.nodes_[x].grad.v[i] += G.v[i] * Y.v[i];
    });
    return out;
  }

  Id log(Id x) {
    const auto& X = val(x);
    Tensor<T> Y = X;
    for (auto& v : Y.v) v = std::log(v);
    Id out = make_node(std::move(Y), needs(x));
    record([x, out](Tape& t) {
      if (!t.needs(x)) return;
      const auto& G = t.nodes_[out].grad;
      const auto& X = t.val(x);
      for (std::size_t i = 0; i < G.size(); ++i) t.nodes_[x].grad.v[i] += G.v[i] / X.v[i];
    });
    return out;
  }

  // sequential fixed-order reduction to a 1x1 scalar
  Id sum(Id x) {
    const auto& X = val(x);
    T s = T(0);
    for (const auto& v : X.v) s += v;
    Id out = make_node(Tensor<T>(1, 1, {s}), needs(x));
    record([x, out](Tape& t) {
      if (!t.needs(x)) return;
      const T g = t.nodes_[out].grad.v[0];
      for (auto& d : t.nodes_[x].grad.v) d += g;
    });
    return out;
  }

  Id mean(Id x) {
    const T inv = T(1) / static_cast<T>(val(x).size());
    return scale(sum(x), inv);
  }

  Id l2_normalize_rows(Id x, T eps = T(1e-12)) {
    const auto& X = val(x);
    Tensor<T> Y = X;
    std::vector<T> norms(X.rows);
    for (std::size_t i = 0; i < X.rows; ++i) {
      T s = T(0);
      for (std::size_t j = 0; j < X.cols; ++j) s += X.at(i, j) * X.at(i, j);
      const T nrm = std::sqrt(s);
      norms[i] = nrm;
      const T m = nrm > eps ? nrm : eps;
      for (std::size_t j = 0; j < X.cols; ++j) Y.at(i, j) /= m;
    }
    Id out = make_node(std::move(Y), needs(x));
    record([x, out, norms, eps](Tape& t) {
      if (!t.needs(x)) return;
      const auto& G = t.nodes_[out].grad;
      const auto& Y = t.val(out);
      auto& DX = t.nodes_[x].grad;
      for (std::size_t i = 0; i < G.rows; ++i) {
        if (norms[i] > eps) {
          T dot = T(0);
          for (std::size_t j = 0; j < G.cols; ++j) dot += G.at(i, j) * Y.at(i, j);
          for (std::size_t j = 0; j < G.cols; ++j)
            DX.at(i, j) += (G.at(i, j) - dot * Y.at(i, j)) / norms[i];
        } else {
          for (std::size_t j = 0; j < G.cols; ++j) DX.at(i, j) += G.at(i, j) / eps;
        }
      }
    });
    return out;
  }

  // Escape hatch for fused operations (losses) with hand-derived backward.
  // The closure receives the output node id so it can read the upstream grad.
  Id custom(Tensor<T> value, bool requires_grad, std::function<void(Tape&, Id)> back) {
    Id out = make_node(std::move(value), requires_grad);
    record([f = std::move(back), out](Tape& t) { f(t, out); });
    return out;
  }

  Tensor<T>& grad_mut(Id id) { return nodes_[id].grad; }

  void backward(Id loss) {
    require(val(loss).size() == 1, "backward: loss must be scalar");
    for (auto& n : nodes_) n.grad.fill(T(0));
    nodes_[loss].grad.v[0] = T(1);
    for (auto it = back_.rbegin(); it != back_.rend(); ++it) (*it)(*this);
  }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool requires_grad;
  };

  bool needs(Id id) const { return nodes_[id].requires_grad; }

  Id make_node(Tensor<T> value, bool requires_grad) {
    nodes_.push_back({std::move(value), Tensor<T>{}, requires_grad});
    Node& n = nodes_.back();
    n.grad = Tensor<T>(n.value.rows, n.value.cols, T(0));
    return static_cast<Id>(nodes_.size() - 1);
  }

  void record(std::function<void(Tape&)> f) { back_.push_back(std::move(f)); }

  std::vector<Node> nodes_;
  std::vector<std::function<void(Tape&)>> back_;
};

}  // namespace cgnn
