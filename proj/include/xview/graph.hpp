#pragma once

#include <deque>
#include <functional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "xview/params.hpp"
#include "xview/tensor.hpp"

namespace xview::num {

class Graph;

// One computation node. Backward closures pull the node's own grad and
// scatter into the parents' grads; they run in reverse creation order,
// which is a valid topological order for a forward-built graph.
struct Node {
  Tensor value;
  Tensor grad;
  bool needs_grad = false;
  bool grad_alloc = false;
  std::vector<Node*> parents;
  std::function<void(Node&)> backfn;
  ParamSet* bound_params = nullptr;
  int bound_index = -1;
};

using Var = Node*;

class Graph {
 public:
  Var constant(Tensor v);
  Var leaf(Tensor v, bool needs_grad = true);
  // Leaf bound to a named parameter; repeated lookups share one node.
  Var param(ParamSet& ps, const std::string& name);

  Var make(Tensor value, std::vector<Var> parents, std::function<void(Node&)> back);

  // Single-shot reverse sweep from a scalar loss. Parameter gradients are
  // accumulated into the bound ParamSet buffers.
  void backward(Var loss);

  size_t size() const { return nodes_.size(); }

  static void accum(Node* n, const Tensor& g);

 private:
  std::deque<Node> nodes_;
  std::unordered_map<std::string, Var> param_cache_;
  bool swept_ = false;
};

// ---- primitive ops ----

Var matmul(Graph& g, Var a, Var b);     // [N,K]x[K,M]
Var matmul_nt(Graph& g, Var a, Var b);  // a * b^T : [N,K]x[M,K] -> [N,M]
Var add(Graph& g, Var a, Var b);
Var sub(Graph& g, Var a, Var b);
Var mul(Graph& g, Var a, Var b);
Var mul_const(Graph& g, Var a, Tensor c);
Var scale(Graph& g, Var a, double s);
Var add_rowvec(Graph& g, Var x, Var b);
Var gelu(Graph& g, Var x);
Var relu(Graph& g, Var x);
Var sqrt_rows(Graph& g, Var x);
Var layer_norm(Graph& g, Var x, Var gain, Var bias, double eps = 1e-5);
Var masked_softmax_rows(Graph& g, Var x, const std::vector<uint8_t>& col_valid);
Var masked_logsumexp_rows(Graph& g, Var x, Tensor mask);  // -> [N,1]
Var slice_rows(Graph& g, Var x, int from, int to);
Var slice_cols(Graph& g, Var x, int from, int to);
Var concat_rows(Graph& g, const std::vector<Var>& parts);
Var concat_cols(Graph& g, const std::vector<Var>& parts);
Var gather_rows(Graph& g, Var table, std::vector<int> idx);

struct BilinearTap {
  int index;
  double weight;
};
// y_i = sum_k w_k * table[idx_k]; used for sampling learnable grids.
Var weighted_gather(Graph& g, Var table, std::vector<std::vector<BilinearTap>> taps);

Var segment_mean(Graph& g, Var x, std::vector<int> assign, int k);
Var row_select(Graph& g, const std::vector<uint8_t>& take_a, Var a, Var b);
Var broadcast_row(Graph& g, Var v, int n);
Var masked_mean_rows(Graph& g, Var x, const std::vector<uint8_t>& valid);
Var mean_rows(Graph& g, Var x);
Var sum_all(Graph& g, Var x);
Var mean_all(Graph& g, Var x);
Var l2_normalize_rows(Graph& g, Var x, double eps = 1e-12);
Var zero_rows(Graph& g, Var x, const std::vector<uint8_t>& keep);
Var reshape(Graph& g, Var x, std::vector<int> shape);

}  // namespace xview::num
