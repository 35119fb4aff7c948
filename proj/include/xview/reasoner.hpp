#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "xview/graph.hpp"
#include "xview/ocva.hpp"

namespace xview::reason {

struct ReasonerConfig {
  int d_r = 64;           // reasoning width
  int d_v = 64;
  int region_tokens = 10;  // c_i, fixed to K
  int adapter_hidden = 128;
  int scorer_heads = 4;
  int max_seq = 192;
};

// Closed whitespace-and-punctuation tokenizer over a fixed word list;
// unknown words map to a learned <unk> embedding.
class Vocab {
 public:
  Vocab();  // id 0 is <unk>
  void add_words(const std::vector<std::string>& words);
  int id(const std::string& word) const;
  int size() const { return static_cast<int>(words_.size()); }
  const std::string& word(int id) const { return words_[id]; }

  // lowercase, split on whitespace, punctuation marks become single tokens
  static std::vector<std::string> split(const std::string& text);
  std::vector<int> encode(const std::string& text) const;

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> index_;
};

void add_reasoner_params(num::ParamSet& ps, const ReasonerConfig& cfg, int vocab_size, Rng& rng);

// Per-token adapter MLP into the reasoning width; invalid slots map to the
// learned null embedding.
num::Var adapt_regions(num::Graph& g, const ocva::AlignedTokens& aligned, num::ParamSet& ps,
                       const ReasonerConfig& cfg);

// g = projection of the mean of per-object pooled aligned tokens,
// o = projection of the target object's pooled tokens.
std::pair<num::Var, num::Var> scene_and_target_cues(num::Graph& g,
                                                    const std::vector<ocva::AlignedTokens>& all,
                                                    int target_index, num::ParamSet& ps,
                                                    const ReasonerConfig& cfg);

struct ReasoningInput {
  num::Var sequence = nullptr;  // L x d_r: [g; o; question with region slots expanded]
  struct Slot {
    int position;  // row in the sequence
    int region;    // index into the sample's region_refs
  };
  std::vector<Slot> slot_map;
};

// `<region>` placeholders are replaced in order by K-row region embeddings.
ReasoningInput assemble_input(num::Graph& g, const std::string& question,
                              const std::vector<num::Var>& region_embeddings, num::Var g_cue,
                              num::Var o_cue, const Vocab& vocab, num::ParamSet& ps,
                              const ReasonerConfig& cfg);

struct AnswerDistribution {
  std::vector<double> scores;
  std::vector<double> probs;
  int predicted = -1;
  num::Var score_row = nullptr;  // 1 x n_options
};

// Self-attention pooling over the sequence, option embeddings from mean
// token embeddings, bilinear scoring, softmax over options.
AnswerDistribution score_answers(num::Graph& g, const ReasoningInput& input,
                                 const std::vector<std::string>& options, const Vocab& vocab,
                                 num::ParamSet& ps, const ReasonerConfig& cfg);

num::Var vqa_loss(num::Graph& g, const AnswerDistribution& dist, int gold);

// Mean of per-pair option scores before the final softmax; reduces to the
// single-pair distribution when only one pair exists.
std::vector<double> aggregate_option_scores(const std::vector<std::vector<double>>& per_pair);
std::vector<double> softmax_values(const std::vector<double>& scores);

}  // namespace xview::reason
