#include "xview/ocva.hpp"

#include <algorithm>
#include <cmath>

#include "xview/errors.hpp"

namespace xview::ocva {

using num::Graph;
using num::ParamSet;
using num::Tensor;
using num::Var;

namespace {

std::string block_prefix(int b) { return "ocva.block" + std::to_string(b); }

}  // namespace

void add_ocva_params(ParamSet& ps, const OcvaConfig& cfg, Rng& rng) {
  for (int b = 0; b < cfg.depth; ++b) {
    const std::string pre = block_prefix(b);
    num::add_mha_params(ps, pre + ".mha", cfg.d_v, rng);
    // start fusion as residual averaging with the matched target: value and
    // output projections at identity, query/key from one shared draw so the
    // initial attention is a content similarity
    ps.value(pre + ".mha.wk") = ps.value(pre + ".mha.wq");
    auto& wv = ps.value(pre + ".mha.wv");
    auto& wo = ps.value(pre + ".mha.wo");
    for (auto& v : wv.data) v = 0.0;
    for (auto& v : wo.data) v = 0.0;
    for (int i = 0; i < cfg.d_v; ++i) {
      wv.at(i, i) = 1.0;
      wo.at(i, i) = 1.0;
    }
    num::add_layer_norm_params(ps, pre + ".ln1", cfg.d_v);
    num::add_mlp_params(ps, pre + ".ffn", cfg.d_v, cfg.ffn_mult * cfg.d_v, cfg.d_v, rng);
    num::add_layer_norm_params(ps, pre + ".ln2", cfg.d_v);
  }
}

AlignedTokens fuse(Graph& g, const art::ObjectTokens& src, const art::ObjectTokens& tgt,
                   const OcvaConfig& cfg, ParamSet& ps) {
  if (src.valid_count() == 0) throw EmptyRegionError("fuse: source object has no valid tokens");
  Var t = src.tokens;
  for (int b = 0; b < cfg.depth; ++b) {
    const std::string pre = block_prefix(b);
    Var attended = mha_forward(g, t, tgt.tokens, tgt.tokens, ps, pre + ".mha", cfg.heads,
                               tgt.validity);
    t = layer_norm(g, add(g, t, attended), g.param(ps, pre + ".ln1.gain"),
                   g.param(ps, pre + ".ln1.bias"));
    Var ff = mlp_forward(g, t, ps, pre + ".ffn", cfg.ffn_mult * cfg.d_v);
    t = layer_norm(g, add(g, t, ff), g.param(ps, pre + ".ln2.gain"),
                   g.param(ps, pre + ".ln2.bias"));
  }
  AlignedTokens out;
  out.tokens = zero_rows(g, t, src.validity);
  out.validity = src.validity;
  out.view_id = src.view_id;
  out.object_index = src.object_index;
  out.track_id = src.track_id;
  out.matched_track = tgt.track_id;
  return out;
}

SupConResult supcon_loss(Graph& g, Var embeddings, const std::vector<int64_t>& labels,
                         double tau) {
  const int n = embeddings->value.rows();
  if (tau <= 0) throw ConfigError("supcon temperature must be > 0");
  if (static_cast<int>(labels.size()) != n) throw ShapeError("supcon: label count");
  if (n < 2) throw ShapeError("supcon: needs at least 2 embeddings");

  SupConResult res;
  std::vector<std::vector<int>> positives(n);
  for (int a = 0; a < n; ++a)
    for (int k = 0; k < n; ++k)
      if (k != a && labels[k] == labels[a]) positives[a].push_back(k);
  int contributing = 0;
  for (int a = 0; a < n; ++a)
    if (!positives[a].empty()) contributing++;
  res.contributing_anchors = contributing;
  if (contributing == 0) {
    res.degenerate = true;
    res.loss = g.constant(Tensor::scalar(0.0));
    return res;
  }

  Var sims = scale(g, matmul_nt(g, embeddings, embeddings), 1.0 / tau);
  Tensor non_self = Tensor::full({n, n}, 1.0);
  for (int i = 0; i < n; ++i) non_self.at(i, i) = 0.0;
  Var lse = masked_logsumexp_rows(g, sims, std::move(non_self));  // n x 1

  Tensor w_lse({n, 1});
  Tensor w_sims({n, n});
  const double inv_a = 1.0 / contributing;
  for (int a = 0; a < n; ++a) {
    if (positives[a].empty()) continue;
    w_lse.at(a, 0) = inv_a;
    const double w = -inv_a / positives[a].size();
    for (int p : positives[a]) w_sims.at(a, p) = w;
  }
  res.loss = add(g, sum_all(g, mul_const(g, lse, std::move(w_lse))),
                 sum_all(g, mul_const(g, sims, std::move(w_sims))));
  return res;
}

TripletResult triplet_loss(Graph& g, Var za, Var zb,
                           const std::vector<std::pair<int, int>>& gold_pairs, double margin) {
  if (margin < 0) throw ConfigError("triplet margin must be >= 0");
  TripletResult res;
  res.anchors = static_cast<int>(gold_pairs.size());
  const int nb = zb->value.rows();
  if (gold_pairs.empty() || nb < 2) {
    res.loss = g.constant(Tensor::scalar(0.0));
    return res;
  }

  const Tensor sims = num::t_matmul(za->value, zb->value, false, true);
  std::vector<Var> terms;
  for (const auto& [i, j] : gold_pairs) {
    if (i < 0 || i >= za->value.rows() || j < 0 || j >= nb)
      throw ShapeError("triplet: gold pair out of range");
    int neg = -1;
    for (int k = 0; k < nb; ++k) {
      if (k == j) continue;
      if (neg < 0 || sims.at(i, k) > sims.at(i, neg)) neg = k;
    }
    Var anchor = slice_rows(g, za, i, i + 1);
    Var pos = slice_rows(g, zb, j, j + 1);
    Var hard = slice_rows(g, zb, neg, neg + 1);
    Var dp = sqrt_rows(g, sum_all(g, mul(g, sub(g, anchor, pos), sub(g, anchor, pos))));
    Var dn = sqrt_rows(g, sum_all(g, mul(g, sub(g, anchor, hard), sub(g, anchor, hard))));
    Var lin = add(g, sub(g, dp, dn), g.constant(Tensor::scalar(margin)));
    terms.push_back(relu(g, lin));
  }
  Var total = terms[0];
  for (size_t t = 1; t < terms.size(); ++t) total = add(g, total, terms[t]);
  res.loss = scale(g, total, 1.0 / static_cast<double>(gold_pairs.size()));
  return res;
}

}  // namespace xview::ocva
