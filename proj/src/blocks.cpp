#include "xview/blocks.hpp"

#include <cmath>

#include "xview/errors.hpp"

namespace xview::num {

void add_mlp_params(ParamSet& ps, const std::string& prefix, int d_in, int hidden, int d_out,
                    Rng& rng) {
  if (ps.has(prefix + ".w1")) return;
  ps.add(prefix + ".w1", xavier_init(d_in, hidden, rng));
  ps.add(prefix + ".b1", Tensor::zeros({hidden}));
  ps.add(prefix + ".w2", xavier_init(hidden, d_out, rng));
  ps.add(prefix + ".b2", Tensor::zeros({d_out}));
}

Var mlp_forward(Graph& g, Var x, ParamSet& ps, const std::string& prefix, int hidden) {
  Var w1 = g.param(ps, prefix + ".w1");
  Var b1 = g.param(ps, prefix + ".b1");
  Var w2 = g.param(ps, prefix + ".w2");
  Var b2 = g.param(ps, prefix + ".b2");
  if (w1->value.rows() != x->value.cols())
    throw ShapeError(prefix + ".w1 " + w1->value.shape_str() + " does not accept input " +
                     x->value.shape_str());
  if (w1->value.cols() != hidden)
    throw ShapeError(prefix + ".w1 " + w1->value.shape_str() + " mismatches hidden " +
                     std::to_string(hidden));
  if (b1->value.numel() != hidden)
    throw ShapeError(prefix + ".b1 " + b1->value.shape_str() + " mismatches hidden");
  if (w2->value.rows() != hidden)
    throw ShapeError(prefix + ".w2 " + w2->value.shape_str() + " mismatches hidden");
  if (b2->value.numel() != w2->value.cols())
    throw ShapeError(prefix + ".b2 " + b2->value.shape_str() + " mismatches output");
  Var h = gelu(g, add_rowvec(g, matmul(g, x, w1), b1));
  return add_rowvec(g, matmul(g, h, w2), b2);
}

void add_mha_params(ParamSet& ps, const std::string& prefix, int d, Rng& rng) {
  if (ps.has(prefix + ".wq")) return;
  for (const char* nm : {"wq", "wk", "wv", "wo"})
    ps.add(prefix + "." + nm, xavier_init(d, d, rng));
  for (const char* nm : {"bq", "bk", "bv", "bo"}) ps.add(prefix + "." + nm, Tensor::zeros({d}));
}

Var mha_forward(Graph& g, Var q, Var k, Var v, ParamSet& ps, const std::string& prefix, int heads,
                const std::vector<uint8_t>& key_validity) {
  const int d = q->value.cols();
  if (heads < 1 || d % heads != 0)
    throw ConfigError("mha: model dim " + std::to_string(d) + " not divisible by " +
                      std::to_string(heads) + " heads");
  if (k->value.cols() != d || v->value.cols() != d || k->value.rows() != v->value.rows())
    throw ShapeError("mha: k " + k->value.shape_str() + " / v " + v->value.shape_str());
  if (static_cast<int>(key_validity.size()) != k->value.rows())
    throw ShapeError("mha: key validity length");
  const int lq = q->value.rows();
  if (lq == 0) return g.constant(Tensor({0, d}));
  bool any_valid = false;
  for (auto kv : key_validity) any_valid |= (kv != 0);
  if (!any_valid) return g.constant(Tensor::zeros({lq, d}));

  Var Q = add_rowvec(g, matmul(g, q, g.param(ps, prefix + ".wq")), g.param(ps, prefix + ".bq"));
  Var K = add_rowvec(g, matmul(g, k, g.param(ps, prefix + ".wk")), g.param(ps, prefix + ".bk"));
  Var V = add_rowvec(g, matmul(g, v, g.param(ps, prefix + ".wv")), g.param(ps, prefix + ".bv"));

  const int dh = d / heads;
  std::vector<Var> outs;
  outs.reserve(heads);
  for (int h = 0; h < heads; ++h) {
    Var qh = slice_cols(g, Q, h * dh, (h + 1) * dh);
    Var kh = slice_cols(g, K, h * dh, (h + 1) * dh);
    Var vh = slice_cols(g, V, h * dh, (h + 1) * dh);
    Var scores = scale(g, matmul_nt(g, qh, kh), 1.0 / std::sqrt(static_cast<double>(dh)));
    Var att = masked_softmax_rows(g, scores, key_validity);
    outs.push_back(matmul(g, att, vh));
  }
  Var o = heads == 1 ? outs[0] : concat_cols(g, outs);
  return add_rowvec(g, matmul(g, o, g.param(ps, prefix + ".wo")), g.param(ps, prefix + ".bo"));
}

void add_layer_norm_params(ParamSet& ps, const std::string& prefix, int d) {
  if (ps.has(prefix + ".gain")) return;
  ps.add(prefix + ".gain", Tensor::full({d}, 1.0));
  ps.add(prefix + ".bias", Tensor::zeros({d}));
}

}  // namespace xview::num
