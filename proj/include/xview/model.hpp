#pragma once

#include <vector>

#include "xview/config.hpp"
#include "xview/qa.hpp"

namespace xview::harness {

// All trainable parameters plus the fixed vocabulary; the synthetic
// encoder's lifting map stays outside the ParamSet, mirroring the frozen
// backbone.
struct Model {
  TrainConfig cfg;
  num::ParamSet params;
  reason::Vocab vocab;

  static Model init(const TrainConfig& cfg);
  static reason::Vocab build_vocab();
};

// One scene pair pushed through tokenize -> embed -> match -> fuse, inside a
// single graph.
struct PairForward {
  int view_a = -1, view_b = -1;
  std::vector<art::ObjectTokens> tokens_a, tokens_b;
  std::vector<int64_t> tracks_a, tracks_b;
  num::Var za = nullptr, zb = nullptr;  // n_a x d_c / n_b x d_c unit embeddings
  num::Tensor similarity;               // n_a x n_b values
  retr::Assignment applied_pi;          // used for fusion
  std::vector<std::pair<int, int>> gold_pairs;  // (row in a, col in b) by track id
  std::vector<ocva::AlignedTokens> aligned_a, aligned_b;
};

// use_gold_pi fuses along the ground-truth pairing (teacher forcing);
// otherwise the retrieved assignment under `mode` is applied.
PairForward build_pair_forward(num::Graph& g, Model& m, const scene::Scene& sc,
                               const std::vector<scene::FeatureMap>& feats, int view_a, int view_b,
                               retr::MatchMode mode, bool use_gold_pi);

// Region-grounded answer scoring for one sample against a pair forward.
reason::AnswerDistribution score_sample(num::Graph& g, Model& m, const PairForward& pf,
                                        const qa::QASample& sample);

// g/o cue and region assembly shared by score_sample and the inspect CLI.
reason::ReasoningInput assemble_sample_input(num::Graph& g, Model& m, const PairForward& pf,
                                             const qa::QASample& sample);

}  // namespace xview::harness
