#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "xview/relations.hpp"
#include "xview/rng.hpp"
#include "xview/scene.hpp"

namespace xview::qa {

struct RegionRef {
  int view_id = -1;
  int object_index = -1;  // into the view's kept projection list

  bool operator==(const RegionRef& o) const {
    return view_id == o.view_id && object_index == o.object_index;
  }
};

struct QASample {
  std::string sample_id;
  int task_id = 0;  // 1..17
  std::string question;
  std::vector<RegionRef> region_refs;
  std::vector<std::string> options;  // 2 or 4
  int gold = -1;
  int64_t scene_id = -1;
  int view_a = -1, view_b = -1;
  std::string gold_class;  // canonical option text, drives class balancing
};

enum class TaskCategory { kCorrespondence, kVisOcc, kGeometric, kPhysical };

TaskCategory task_category(int task_id);
std::string task_category_name(TaskCategory cat);
std::string task_name(int task_id);  // "Q1".."Q17"
int task_option_count(int task_id);

// Fixed per-task template pools and canonical option lists.
struct TaskSpec {
  int id;
  std::vector<std::string> templates;
  std::vector<std::string> options;
  bool shuffle_options;  // class-label tasks shuffle the option order per sample
};
const std::vector<TaskSpec>& task_specs();

// Every word appearing in templates and options, sorted and deduplicated;
// feeds the reasoner vocabulary.
std::vector<std::string> template_vocabulary();

// Rule-based instantiation from scene ground truth; returns every generated
// sample over all unordered view pairs (capped per pair). Unsatisfiable
// preconditions yield an empty list.
std::vector<QASample> instantiate_qa(const scene::Scene& sc, const scene::RelationRecords& rel,
                                     int task_id, Rng& rng, int per_pair_cap = 2);
std::vector<QASample> instantiate_qa(const scene::Scene& sc, int task_id, Rng& rng,
                                     int per_pair_cap = 2);

// Re-derives the expected gold index from scene ground truth; nullopt when
// the sample's preconditions do not hold.
std::optional<int> derive_gold(const QASample& sample, const scene::Scene& sc,
                               const scene::RelationRecords& rel);

// Invariant checks plus answer re-derivation; an empty list means the sample
// is retained.
std::vector<std::string> validate_sample(const QASample& sample, const scene::Scene& sc);
std::vector<std::string> validate_sample(const QASample& sample, const scene::Scene& sc,
                                         const scene::RelationRecords& rel);

// Seeded per-task subsampling to equal gold-class counts.
std::vector<QASample> balance_gold_classes(std::vector<QASample> samples, Rng& rng);

struct SplitManifest {
  struct Split {
    std::string name;
    double ratio = 0;
    std::vector<int64_t> scene_ids;  // sorted
  };
  std::vector<Split> splits;

  const Split* find(const std::string& name) const;
  bool contains(const std::string& name, int64_t scene_id) const;
  std::string serialize() const;
  static SplitManifest parse(const std::string& text);
};

// Assignment by scene id only; deterministic for a fixed seed. Ratios must
// sum to 1 within 1e-9 and there must be at least one scene per split.
SplitManifest build_split(const std::vector<int64_t>& scene_ids,
                          const std::vector<std::pair<std::string, double>>& ratios,
                          uint64_t seed);

struct CorpusRecord {
  QASample sample;
  std::string bundle_path;
};

// One UTF-8 JSON record per line.
void save_corpus(const std::string& path, const std::vector<CorpusRecord>& records);
std::vector<CorpusRecord> load_corpus(const std::string& path);

}  // namespace xview::qa
