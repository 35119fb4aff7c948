#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "xview/art.hpp"
#include "xview/graph.hpp"

namespace xview::ocva {

struct OcvaConfig {
  int heads = 8;
  int depth = 2;
  double tau = 0.07;     // SupCon temperature
  double margin = 0.5;   // triplet margin
  int ffn_mult = 4;      // FFN hidden = ffn_mult * d_v
  int d_v = 64;
};

void add_ocva_params(num::ParamSet& ps, const OcvaConfig& cfg, Rng& rng);

struct AlignedTokens {
  num::Var tokens = nullptr;      // K x d_v, validity matches the source object
  std::vector<uint8_t> validity;
  int view_id = -1;
  int object_index = -1;
  int64_t track_id = -1;
  int64_t matched_track = -1;     // -1 when fused against a placeholder
};

// Per block: T <- LN(T + MHA(T, T~, T~)) then T <- LN(T + FFN(T)), with
// target-validity masking. A placeholder target reduces to the LN/FFN
// residual path on the source alone.
AlignedTokens fuse(num::Graph& g, const art::ObjectTokens& src, const art::ObjectTokens& tgt,
                   const OcvaConfig& cfg, num::ParamSet& ps);

struct SupConResult {
  num::Var loss = nullptr;
  bool degenerate = false;  // no anchor had a positive
  int contributing_anchors = 0;
};

// Supervised contrastive loss over unit embeddings with track-id labels;
// anchors without positives are skipped.
SupConResult supcon_loss(num::Graph& g, num::Var embeddings, const std::vector<int64_t>& labels,
                         double tau);

struct TripletResult {
  num::Var loss = nullptr;
  int anchors = 0;
};

// Online hard-negative triplet loss: per gold pair (i -> j), the negative is
// the highest-similarity target embedding other than the positive; Euclidean
// distances, hinge at `margin`, mean over anchors.
TripletResult triplet_loss(num::Graph& g, num::Var za, num::Var zb,
                           const std::vector<std::pair<int, int>>& gold_pairs, double margin);

}  // namespace xview::ocva
