#include "xview/reasoner.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "xview/errors.hpp"

namespace xview::reason {

using num::Graph;
using num::ParamSet;
using num::Tensor;
using num::Var;

Vocab::Vocab() {
  words_.push_back("<unk>");
  index_["<unk>"] = 0;
}

void Vocab::add_words(const std::vector<std::string>& words) {
  for (const auto& w : words) {
    if (w.empty() || index_.count(w)) continue;
    index_[w] = static_cast<int>(words_.size());
    words_.push_back(w);
  }
}

int Vocab::id(const std::string& word) const {
  auto it = index_.find(word);
  return it == index_.end() ? 0 : it->second;
}

std::vector<std::string> Vocab::split(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&]() {
    if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  };
  for (char raw : text) {
    const unsigned char uc = static_cast<unsigned char>(raw);
    const char c = static_cast<char>(std::tolower(uc));
    if (std::isspace(uc)) {
      flush();
    } else if (std::isalnum(uc)) {
      cur.push_back(c);
    } else {
      flush();
      out.push_back(std::string(1, c));
    }
  }
  flush();
  return out;
}

std::vector<int> Vocab::encode(const std::string& text) const {
  std::vector<int> ids;
  for (const auto& w : split(text)) ids.push_back(id(w));
  return ids;
}

namespace {

num::Tensor identity_matrix(int n) {
  num::Tensor t({n, n});
  for (int i = 0; i < n; ++i) t.at(i, i) = 1.0;
  return t;
}

}  // namespace

void add_reasoner_params(ParamSet& ps, const ReasonerConfig& cfg, int vocab_size, Rng& rng) {
  num::add_mlp_params(ps, "adapter", cfg.d_v, cfg.adapter_hidden, cfg.d_r, rng);
  if (!ps.has("adapter.null")) ps.add("adapter.null", num::uniform_init({1, cfg.d_r}, 0.5, rng));
  // cue projections run after the shared adapter and start at identity, so
  // the cues land in the same space as the injected region tokens
  if (!ps.has("cue_g.w")) {
    ps.add("cue_g.w", identity_matrix(cfg.d_r));
    ps.add("cue_g.b", Tensor::zeros({cfg.d_r}));
    ps.add("cue_o.w", identity_matrix(cfg.d_r));
    ps.add("cue_o.b", Tensor::zeros({cfg.d_r}));
  }
  // token embeddings start at the scale of the adapted region content, so
  // option scores separate from the first steps
  if (!ps.has("scorer.tokens"))
    ps.add("scorer.tokens", num::uniform_init({vocab_size, cfg.d_r}, 0.5, rng));
  // position embeddings carry the sample-independent channel the bilinear
  // readout decodes (which block the pooling attention settled on), so they
  // start at a scale comparable to the region content
  if (!ps.has("scorer.pos"))
    ps.add("scorer.pos", num::uniform_init({cfg.max_seq, cfg.d_r}, 0.75, rng));
  num::add_mha_params(ps, "scorer.sa", cfg.d_r, rng);
  // a shared query/key draw makes the initial attention a positive
  // semi-definite content similarity, which the pooling cues exploit
  ps.value("scorer.sa.wk") = ps.value("scorer.sa.wq");
  if (!ps.has("scorer.bilinear")) ps.add("scorer.bilinear", num::xavier_init(cfg.d_r, cfg.d_r, rng));
}

Var adapt_regions(Graph& g, const ocva::AlignedTokens& aligned, ParamSet& ps,
                  const ReasonerConfig& cfg) {
  if (aligned.tokens == nullptr || aligned.validity.empty())
    throw EmptyRegionError("adapt_regions: empty region");
  int valid = 0;
  for (auto v : aligned.validity) valid += v ? 1 : 0;
  if (valid == 0) throw EmptyRegionError("adapt_regions: region has no valid tokens");
  Var mapped = mlp_forward(g, aligned.tokens, ps, "adapter", cfg.adapter_hidden);
  return row_select(g, aligned.validity, mapped, g.param(ps, "adapter.null"));
}

std::pair<Var, Var> scene_and_target_cues(Graph& g, const std::vector<ocva::AlignedTokens>& all,
                                          int target_index, ParamSet& ps,
                                          const ReasonerConfig& cfg) {
  if (target_index < 0 || target_index >= static_cast<int>(all.size()))
    throw EmptyRegionError("scene_and_target_cues: dangling target");
  std::vector<Var> pools;
  pools.reserve(all.size());
  for (const auto& a : all) pools.push_back(masked_mean_rows(g, a.tokens, a.validity));
  Var g_pre = mean_rows(g, concat_rows(g, pools));
  Var o_pre = pools[target_index];
  // shared adapter into the reasoning space, then per-cue linear heads
  Var g_adapted = mlp_forward(g, g_pre, ps, "adapter", cfg.adapter_hidden);
  Var o_adapted = mlp_forward(g, o_pre, ps, "adapter", cfg.adapter_hidden);
  Var g_cue = add_rowvec(g, matmul(g, g_adapted, g.param(ps, "cue_g.w")), g.param(ps, "cue_g.b"));
  Var o_cue = add_rowvec(g, matmul(g, o_adapted, g.param(ps, "cue_o.w")), g.param(ps, "cue_o.b"));
  return {g_cue, o_cue};
}

namespace {
constexpr const char* kRegionPlaceholder = "<region>";
}

ReasoningInput assemble_input(Graph& g, const std::string& question,
                              const std::vector<Var>& region_embeddings, Var g_cue, Var o_cue,
                              const Vocab& vocab, ParamSet& ps, const ReasonerConfig& cfg) {
  ReasoningInput out;
  std::vector<Var> parts{g_cue, o_cue};
  int position = 2;
  size_t cursor = 0;
  size_t region = 0;
  Var table = g.param(ps, "scorer.tokens");

  auto push_text = [&](const std::string& text) {
    const auto ids = vocab.encode(text);
    if (ids.empty()) return;
    parts.push_back(gather_rows(g, table, ids));
    position += static_cast<int>(ids.size());
  };

  while (true) {
    const size_t hit = question.find(kRegionPlaceholder, cursor);
    if (hit == std::string::npos) {
      push_text(question.substr(cursor));
      break;
    }
    push_text(question.substr(cursor, hit - cursor));
    if (region >= region_embeddings.size())
      throw ConfigError("assemble_input: more placeholders than region embeddings");
    Var emb = region_embeddings[region];
    if (emb->value.rows() != cfg.region_tokens)
      throw ShapeError("assemble_input: region embedding must have K rows");
    for (int k = 0; k < cfg.region_tokens; ++k)
      out.slot_map.push_back({position + k, static_cast<int>(region)});
    parts.push_back(emb);
    position += cfg.region_tokens;
    region++;
    cursor = hit + std::string(kRegionPlaceholder).size();
  }
  if (region != region_embeddings.size())
    throw ConfigError("assemble_input: fewer placeholders than region embeddings");
  out.sequence = concat_rows(g, parts);
  return out;
}

AnswerDistribution score_answers(Graph& g, const ReasoningInput& input,
                                 const std::vector<std::string>& options, const Vocab& vocab,
                                 ParamSet& ps, const ReasonerConfig& cfg) {
  if (input.sequence == nullptr || input.sequence->value.rows() == 0)
    throw EmptyRegionError("score_answers: empty reasoning sequence");
  if (options.size() < 2) throw ConfigError("score_answers: need at least 2 options");
  const int length = input.sequence->value.rows();
  if (length > cfg.max_seq)
    throw ConfigError("score_answers: sequence length " + std::to_string(length) +
                      " exceeds max_seq " + std::to_string(cfg.max_seq));

  Var pos = slice_rows(g, g.param(ps, "scorer.pos"), 0, length);
  Var e = add(g, input.sequence, pos);
  // the two visual prefix cues act as pooling queries over the sequence, so
  // the target-object cue can weigh each region block directly
  Var cues = slice_rows(g, e, 0, std::min(2, length));
  Var sa = mha_forward(g, cues, e, e, ps, "scorer.sa", cfg.scorer_heads,
                       std::vector<uint8_t>(length, 1));
  Var ctx = mean_rows(g, add(g, cues, sa));
  Var projected = matmul(g, ctx, g.param(ps, "scorer.bilinear"));

  Var table = g.param(ps, "scorer.tokens");
  std::vector<Var> scores;
  for (const auto& opt : options) {
    auto ids = vocab.encode(opt);
    if (ids.empty()) ids.push_back(0);
    Var opt_emb = mean_rows(g, gather_rows(g, table, ids));
    scores.push_back(matmul_nt(g, projected, opt_emb));
  }

  AnswerDistribution dist;
  dist.score_row = concat_cols(g, scores);
  dist.scores = dist.score_row->value.data;
  dist.probs = softmax_values(dist.scores);
  dist.predicted = 0;
  for (size_t i = 1; i < dist.scores.size(); ++i)
    if (dist.scores[i] > dist.scores[dist.predicted]) dist.predicted = static_cast<int>(i);
  return dist;
}

Var vqa_loss(Graph& g, const AnswerDistribution& dist, int gold) {
  const int n = dist.score_row->value.cols();
  if (gold < 0 || gold >= n) throw ConfigError("vqa_loss: gold index out of range");
  Var lse = masked_logsumexp_rows(g, dist.score_row, Tensor::full({1, n}, 1.0));
  Var gold_score = slice_cols(g, dist.score_row, gold, gold + 1);
  return reshape(g, sub(g, lse, gold_score), {1});
}

std::vector<double> aggregate_option_scores(const std::vector<std::vector<double>>& per_pair) {
  if (per_pair.empty()) throw ConfigError("aggregate_option_scores: no pairs");
  std::vector<double> mean(per_pair[0].size(), 0.0);
  for (const auto& row : per_pair) {
    if (row.size() != mean.size()) throw ShapeError("aggregate_option_scores: ragged scores");
    for (size_t i = 0; i < row.size(); ++i) mean[i] += row[i];
  }
  for (auto& v : mean) v /= static_cast<double>(per_pair.size());
  return mean;
}

std::vector<double> softmax_values(const std::vector<double>& scores) {
  double mx = scores[0];
  for (double s : scores) mx = std::max(mx, s);
  std::vector<double> probs(scores.size());
  for (size_t i = 0; i < scores.size(); ++i) probs[i] = std::exp(scores[i] - mx);
  // summing in value order keeps the result exactly permutation-equivariant
  std::vector<double> ordered = probs;
  std::sort(ordered.begin(), ordered.end());
  double z = 0;
  for (double v : ordered) z += v;
  for (auto& p : probs) p /= z;
  return probs;
}

}  // namespace xview::reason
