#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "xview/art.hpp"
#include "xview/ocva.hpp"
#include "xview/reasoner.hpp"
#include "xview/retrieval.hpp"
#include "xview/scene.hpp"

namespace xview::harness {

// Plain text "key = value" configuration, one entry per line, '#' comments.
struct KvConfig {
  std::map<std::string, std::string> values;

  static KvConfig parse(const std::string& text);
  static KvConfig parse_file(const std::string& path);
  std::string serialize() const;  // sorted keys, canonical number formatting

  bool has(const std::string& key) const { return values.count(key) > 0; }
  std::string get_str(const std::string& key, const std::string& fallback) const;
  int64_t get_int(const std::string& key, int64_t fallback) const;
  uint64_t get_u64(const std::string& key, uint64_t fallback) const;
  double get_f64(const std::string& key, double fallback) const;

  void set_str(const std::string& key, const std::string& v) { values[key] = v; }
  void set_int(const std::string& key, int64_t v);
  void set_u64(const std::string& key, uint64_t v);
  void set_f64(const std::string& key, double v);
};

struct TrainConfig {
  double lambda_vqa = 0.5;
  double lambda_sc = 1.0;
  double lambda_tri = 0.1;
  int64_t steps = 300;
  int batch = 8;  // scene pairs per step
  uint64_t seed = 1;
  retr::MatchMode match_mode = retr::MatchMode::kGreedy;
  double retrieved_pi_fraction = 0.5;  // fraction of pairs fused with retrieved pi
  int vqa_per_pair = 2;
  double match_threshold = -1.0;
  double lr = 1e-4;
  double weight_decay = 0.01;
  int d_c = 256;

  int train_scenes = 200;
  int eval_scenes = 60;
  int train_cap_per_pair = 2;
  // correspondence tasks get a larger share of the training corpus, loosely
  // mirroring the source taxonomy's category proportions
  int train_cap_correspondence = 4;
  int eval_cap_per_pair = 4;

  scene::SceneConfig scene;
  scene::EncoderConfig encoder;
  art::ArtConfig art;
  ocva::OcvaConfig ocva;
  reason::ReasonerConfig reasoner;

  void validate() const;
  KvConfig to_kv() const;
  static TrainConfig from_kv(const KvConfig& kv);
};

}  // namespace xview::harness
