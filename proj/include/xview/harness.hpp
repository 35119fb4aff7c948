#pragma once

#include <map>
#include <string>
#include <vector>

#include "xview/checkpoint.hpp"
#include "xview/model.hpp"
#include "xview/scene_io.hpp"

namespace xview::harness {

// Generated dataset directory: scenes/scene_<id>/..., train.jsonl,
// eval.jsonl, splits.txt, config.txt.
struct DataStore {
  std::string root;
  qa::SplitManifest splits;
  KvConfig config;

  static DataStore open(const std::string& root);
  std::string scene_dir(int64_t scene_id) const;
  const scene::SceneBundle& bundle(int64_t scene_id) const;
  std::vector<qa::CorpusRecord> corpus(const std::string& split) const;
  std::vector<int64_t> split_ids(const std::string& split) const;

 private:
  mutable std::map<int64_t, scene::SceneBundle> cache_;
};

struct GenSummary {
  int train_scenes = 0, eval_scenes = 0;
  size_t train_samples = 0, eval_samples = 0;
};

// Scenes + rendered features + QA corpora + scene-disjoint split manifest.
GenSummary generate_data(const TrainConfig& cfg, const std::string& out_dir);

struct StepLog {
  int64_t step = 0;
  double total = 0, vqa = 0, sc = 0, tri = 0, lr = 0;
};

std::string format_trace(const std::vector<StepLog>& trace);

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<StepLog> trace;
};

// Composite-objective training over the train split; pass a checkpoint to
// resume the uninterrupted schedule, or stop_after to checkpoint mid-run
// without shortening the cosine horizon. Aborts on a non-finite loss naming
// the step and component losses.
TrainResult train(const TrainConfig& cfg, const DataStore& data,
                  const Checkpoint* resume = nullptr, int64_t stop_after = -1);

struct EvalReport {
  struct Stat {
    int total = 0, correct = 0;
    double accuracy() const { return total ? static_cast<double>(correct) / total : 0.0; }
  };
  std::map<int, Stat> per_task;
  Stat overall;
  int retrieval_hits = 0, retrieval_total = 0;
  double retrieval_chance_sum = 0;  // sum of 1/n_b over anchors
  retr::MatchMode mode = retr::MatchMode::kGreedy;

  Stat category(qa::TaskCategory cat) const;
  double retrieval_top1() const {
    return retrieval_total ? static_cast<double>(retrieval_hits) / retrieval_total : 0.0;
  }
  double retrieval_chance() const {
    return retrieval_total ? retrieval_chance_sum / retrieval_total : 0.0;
  }
  std::string text_table() const;
  std::string to_json_lines() const;
};

// Deterministic scoring pass; refuses corpora that share scene ids with the
// training manifest.
EvalReport evaluate(Model& m, const DataStore& data, const std::vector<qa::CorpusRecord>& corpus,
                    retr::MatchMode mode, const std::vector<int64_t>& train_scene_ids);

Model model_from_checkpoint(const Checkpoint& ckpt);

}  // namespace xview::harness
