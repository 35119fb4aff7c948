#pragma once

#include <optional>
#include <string>
#include <vector>

#include "xview/art.hpp"
#include "xview/graph.hpp"

namespace xview::retr {

// Masked mean over the valid token slots.
num::Var pool_object(num::Graph& g, const art::ObjectTokens& tokens);

void add_embed_params(num::ParamSet& ps, int d_v, int d_c, Rng& rng);

// Shared contrastive head: two-layer MLP to d_c, then L2 normalization.
num::Var embed(num::Graph& g, num::Var pooled, num::ParamSet& ps, int d_c);

// S_ij = z_i . z_j over unit vectors.
num::Var similarity_matrix(num::Graph& g, num::Var za, num::Var zb);

enum class MatchMode { kGt, kGreedy, kHungarian };

std::string match_mode_name(MatchMode mode);
std::optional<MatchMode> parse_match_mode(const std::string& name);

struct Assignment {
  std::vector<int> target_for_row;  // column per row, -1 when unmatched
  MatchMode mode = MatchMode::kGreedy;
  double total_score = 0.0;

  int matched_count() const {
    int n = 0;
    for (int t : target_for_row) n += t >= 0 ? 1 : 0;
    return n;
  }
  std::optional<int> row_for_target(int col) const {
    for (size_t r = 0; r < target_for_row.size(); ++r)
      if (target_for_row[r] == col) return static_cast<int>(r);
    return std::nullopt;
  }
};

// Exact maximum-total-score assignment of all rows (requires rows <= cols);
// implemented as min-cost matching with potentials on the negated scores.
std::vector<int> hungarian_max(const num::Tensor& scores);

// greedy: repeated global max over unmatched rows/columns, ties broken by
// (lower row, lower column); hungarian: exact optimum; gt: caller-supplied
// canonical pairing, analysis only. Pairs scoring below `threshold` are left
// unmatched (default -1 keeps everything).
Assignment match(const num::Tensor& scores, MatchMode mode,
                 const std::vector<std::pair<int, int>>* canonical = nullptr,
                 double threshold = -1.0);

// Slot i of the output holds tokens_b[pi(i)]; unmatched rows receive an
// all-invalid placeholder.
std::vector<art::ObjectTokens> reorder(num::Graph& g, const std::vector<art::ObjectTokens>& tokens_b,
                                       const Assignment& pi, const art::ArtConfig& cfg);

}  // namespace xview::retr
