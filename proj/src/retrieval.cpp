#include "xview/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>

#include "xview/errors.hpp"

namespace xview::retr {

using num::Graph;
using num::ParamSet;
using num::Tensor;
using num::Var;

Var pool_object(Graph& g, const art::ObjectTokens& tokens) {
  if (tokens.valid_count() == 0) throw EmptyRegionError("pool_object: no valid token slots");
  return masked_mean_rows(g, tokens.tokens, tokens.validity);
}

void add_embed_params(ParamSet& ps, int d_v, int d_c, Rng& rng) {
  num::add_mlp_params(ps, "g", d_v, d_c, d_c, rng);
}

Var embed(Graph& g, Var pooled, ParamSet& ps, int d_c) {
  Var raw = mlp_forward(g, pooled, ps, "g", d_c);
  double norm2 = 0;
  for (double v : raw->value.data) norm2 += v * v;
  if (norm2 < 1e-24)
    std::cerr << "[xview] warning: zero-norm embedding stabilized by epsilon\n";
  return l2_normalize_rows(g, raw, 1e-12);
}

Var similarity_matrix(Graph& g, Var za, Var zb) { return matmul_nt(g, za, zb); }

std::string match_mode_name(MatchMode mode) {
  switch (mode) {
    case MatchMode::kGt: return "gt";
    case MatchMode::kGreedy: return "greedy";
    case MatchMode::kHungarian: return "hungarian";
  }
  return "?";
}

std::optional<MatchMode> parse_match_mode(const std::string& name) {
  if (name == "gt") return MatchMode::kGt;
  if (name == "greedy") return MatchMode::kGreedy;
  if (name == "hungarian") return MatchMode::kHungarian;
  return std::nullopt;
}

std::vector<int> hungarian_max(const Tensor& scores) {
  const int n = scores.rows();
  const int m = scores.cols();
  if (n == 0 || m == 0) return {};
  if (n > m) throw ShapeError("hungarian_max: needs rows <= cols");
  constexpr double kInf = std::numeric_limits<double>::infinity();

  // potentials over a 1-indexed cost matrix, cost = -score
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(m + 1, kInf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = kInf;
      int j1 = -1;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = -scores.at(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= m; ++j)
    if (p[j] > 0) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

Assignment match(const Tensor& scores, MatchMode mode,
                 const std::vector<std::pair<int, int>>* canonical, double threshold) {
  const int n = scores.rows();
  const int m = scores.cols();
  Assignment out;
  out.mode = mode;
  out.target_for_row.assign(n, -1);
  if (n == 0 || m == 0) return out;

  switch (mode) {
    case MatchMode::kGt: {
      if (!canonical) throw ConfigError("gt matching requires a canonical pairing");
      for (const auto& [r, c] : *canonical) {
        if (r < 0 || r >= n || c < 0 || c >= m) throw ShapeError("gt pairing out of range");
        out.target_for_row[r] = c;
      }
      break;
    }
    case MatchMode::kGreedy: {
      std::vector<char> row_used(n, 0), col_used(m, 0);
      const int want = std::min(n, m);
      for (int step = 0; step < want; ++step) {
        double best = -std::numeric_limits<double>::infinity();
        int br = -1, bc = -1;
        for (int r = 0; r < n; ++r) {
          if (row_used[r]) continue;
          for (int c = 0; c < m; ++c) {
            if (col_used[c]) continue;
            if (scores.at(r, c) > best) {
              best = scores.at(r, c);
              br = r;
              bc = c;
            }
          }
        }
        if (br < 0 || best < threshold) break;
        row_used[br] = 1;
        col_used[bc] = 1;
        out.target_for_row[br] = bc;
      }
      break;
    }
    case MatchMode::kHungarian: {
      if (n <= m) {
        out.target_for_row = hungarian_max(scores);
      } else {
        Tensor tr({m, n});
        for (int r = 0; r < n; ++r)
          for (int c = 0; c < m; ++c) tr.at(c, r) = scores.at(r, c);
        auto col_to_row = hungarian_max(tr);
        for (int c = 0; c < m; ++c)
          if (col_to_row[c] >= 0) out.target_for_row[col_to_row[c]] = c;
      }
      for (int r = 0; r < n; ++r)
        if (out.target_for_row[r] >= 0 && scores.at(r, out.target_for_row[r]) < threshold)
          out.target_for_row[r] = -1;
      break;
    }
  }
  out.total_score = 0.0;
  for (int r = 0; r < n; ++r)
    if (out.target_for_row[r] >= 0) out.total_score += scores.at(r, out.target_for_row[r]);
  return out;
}

std::vector<art::ObjectTokens> reorder(Graph& g, const std::vector<art::ObjectTokens>& tokens_b,
                                       const Assignment& pi, const art::ArtConfig& cfg) {
  std::vector<art::ObjectTokens> out;
  out.reserve(pi.target_for_row.size());
  for (int target : pi.target_for_row) {
    if (target < 0) {
      out.push_back(art::placeholder_tokens(g, cfg));
    } else {
      if (target >= static_cast<int>(tokens_b.size()))
        throw ShapeError("reorder: mapping index out of range");
      out.push_back(tokens_b[target]);
    }
  }
  return out;
}

}  // namespace xview::retr
