#include "xview/model.hpp"

#include <algorithm>

#include "xview/errors.hpp"

namespace xview::harness {

using num::Graph;
using num::Var;

reason::Vocab Model::build_vocab() {
  reason::Vocab vocab;
  vocab.add_words(qa::template_vocabulary());
  return vocab;
}

Model Model::init(const TrainConfig& cfg) {
  cfg.validate();
  Model m;
  m.cfg = cfg;
  m.vocab = build_vocab();
  Rng rng(mix_seed(cfg.seed, 0x1217ull, 0x9ull));
  art::add_art_params(m.params, cfg.art, rng);
  retr::add_embed_params(m.params, cfg.encoder.d_v, cfg.d_c, rng);
  ocva::add_ocva_params(m.params, cfg.ocva, rng);
  reason::add_reasoner_params(m.params, cfg.reasoner, m.vocab.size(), rng);
  return m;
}

PairForward build_pair_forward(Graph& g, Model& m, const scene::Scene& sc,
                               const std::vector<scene::FeatureMap>& feats, int view_a, int view_b,
                               retr::MatchMode mode, bool use_gold_pi) {
  if (view_a == view_b) throw ConfigError("pair forward needs two distinct views");
  PairForward pf;
  pf.view_a = view_a;
  pf.view_b = view_b;

  auto tokenize_view = [&](int view, std::vector<art::ObjectTokens>& out,
                           std::vector<int64_t>& tracks) {
    const auto& projs = sc.projections[view];
    for (size_t i = 0; i < projs.size(); ++i) {
      const uint64_t seed = mix_seed(sc.seed, static_cast<uint64_t>(view),
                                     static_cast<uint64_t>(projs[i].track_id), 0xA47ull);
      auto toks = art::tokenize_region(g, feats[view], projs[i].mask, m.cfg.art, m.params, seed);
      toks.view_id = view;
      toks.object_index = static_cast<int>(i);
      toks.track_id = projs[i].track_id;
      out.push_back(std::move(toks));
      tracks.push_back(projs[i].track_id);
    }
  };
  tokenize_view(view_a, pf.tokens_a, pf.tracks_a);
  tokenize_view(view_b, pf.tokens_b, pf.tracks_b);

  auto embed_side = [&](const std::vector<art::ObjectTokens>& toks) -> Var {
    if (toks.empty()) return nullptr;
    std::vector<Var> rows;
    rows.reserve(toks.size());
    for (const auto& t : toks) rows.push_back(retr::embed(g, retr::pool_object(g, t), m.params, m.cfg.d_c));
    return concat_rows(g, rows);
  };
  pf.za = embed_side(pf.tokens_a);
  pf.zb = embed_side(pf.tokens_b);

  for (size_t i = 0; i < pf.tracks_a.size(); ++i)
    for (size_t j = 0; j < pf.tracks_b.size(); ++j)
      if (pf.tracks_a[i] == pf.tracks_b[j])
        pf.gold_pairs.emplace_back(static_cast<int>(i), static_cast<int>(j));

  if (pf.za && pf.zb) {
    pf.similarity = retr::similarity_matrix(g, pf.za, pf.zb)->value;
  } else {
    pf.similarity = num::Tensor({static_cast<int>(pf.tracks_a.size()),
                                 static_cast<int>(pf.tracks_b.size())});
  }

  if (use_gold_pi) {
    pf.applied_pi.mode = retr::MatchMode::kGt;
    pf.applied_pi.target_for_row.assign(pf.tracks_a.size(), -1);
    for (const auto& [i, j] : pf.gold_pairs) pf.applied_pi.target_for_row[i] = j;
  } else if (mode == retr::MatchMode::kGt) {
    // canonical ordering: per-view lists are track-sorted; pair by index
    std::vector<std::pair<int, int>> canonical;
    const int n = static_cast<int>(std::min(pf.tracks_a.size(), pf.tracks_b.size()));
    for (int i = 0; i < n; ++i) canonical.emplace_back(i, i);
    pf.applied_pi = retr::match(pf.similarity, mode, &canonical, m.cfg.match_threshold);
  } else {
    pf.applied_pi = retr::match(pf.similarity, mode, nullptr, m.cfg.match_threshold);
  }

  auto matched_b = retr::reorder(g, pf.tokens_b, pf.applied_pi, m.cfg.art);
  for (size_t i = 0; i < pf.tokens_a.size(); ++i) {
    auto aligned = ocva::fuse(g, pf.tokens_a[i], matched_b[i], m.cfg.ocva, m.params);
    aligned.view_id = view_a;
    aligned.object_index = static_cast<int>(i);
    aligned.track_id = pf.tracks_a[i];
    pf.aligned_a.push_back(std::move(aligned));
  }

  // reverse direction: b objects fused against their matched a objects
  retr::Assignment inverse;
  inverse.mode = pf.applied_pi.mode;
  inverse.target_for_row.assign(pf.tracks_b.size(), -1);
  for (size_t i = 0; i < pf.applied_pi.target_for_row.size(); ++i) {
    const int j = pf.applied_pi.target_for_row[i];
    if (j >= 0) inverse.target_for_row[j] = static_cast<int>(i);
  }
  auto matched_a = retr::reorder(g, pf.tokens_a, inverse, m.cfg.art);
  for (size_t j = 0; j < pf.tokens_b.size(); ++j) {
    auto aligned = ocva::fuse(g, pf.tokens_b[j], matched_a[j], m.cfg.ocva, m.params);
    aligned.view_id = view_b;
    aligned.object_index = static_cast<int>(j);
    aligned.track_id = pf.tracks_b[j];
    pf.aligned_b.push_back(std::move(aligned));
  }
  return pf;
}

namespace {

const ocva::AlignedTokens& aligned_for_ref(const PairForward& pf, const qa::RegionRef& ref) {
  if (ref.view_id == pf.view_a) {
    if (ref.object_index < 0 || ref.object_index >= static_cast<int>(pf.aligned_a.size()))
      throw EmptyRegionError("region reference outside view " + std::to_string(ref.view_id));
    return pf.aligned_a[ref.object_index];
  }
  if (ref.view_id == pf.view_b) {
    if (ref.object_index < 0 || ref.object_index >= static_cast<int>(pf.aligned_b.size()))
      throw EmptyRegionError("region reference outside view " + std::to_string(ref.view_id));
    return pf.aligned_b[ref.object_index];
  }
  throw EmptyRegionError("region reference to a view outside the pair");
}

}  // namespace

reason::ReasoningInput assemble_sample_input(Graph& g, Model& m, const PairForward& pf,
                                             const qa::QASample& sample) {
  std::vector<Var> region_embeddings;
  region_embeddings.reserve(sample.region_refs.size());
  for (const auto& ref : sample.region_refs)
    region_embeddings.push_back(
        reason::adapt_regions(g, aligned_for_ref(pf, ref), m.params, m.cfg.reasoner));

  std::vector<ocva::AlignedTokens> all;
  all.insert(all.end(), pf.aligned_a.begin(), pf.aligned_a.end());
  all.insert(all.end(), pf.aligned_b.begin(), pf.aligned_b.end());
  if (all.empty()) throw EmptyRegionError("pair has no objects to pool cues from");

  int target_index = 0;
  if (!sample.region_refs.empty()) {
    const auto& tref = sample.region_refs[0];
    target_index = tref.view_id == pf.view_a
                       ? tref.object_index
                       : static_cast<int>(pf.aligned_a.size()) + tref.object_index;
  }
  auto [g_cue, o_cue] = reason::scene_and_target_cues(g, all, target_index, m.params,
                                                      m.cfg.reasoner);
  return reason::assemble_input(g, sample.question, region_embeddings, g_cue, o_cue, m.vocab,
                                m.params, m.cfg.reasoner);
}

reason::AnswerDistribution score_sample(Graph& g, Model& m, const PairForward& pf,
                                        const qa::QASample& sample) {
  auto input = assemble_sample_input(g, m, pf, sample);
  return reason::score_answers(g, input, sample.options, m.vocab, m.params, m.cfg.reasoner);
}

}  // namespace xview::harness
