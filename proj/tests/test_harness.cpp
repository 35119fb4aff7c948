#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "xview/harness.hpp"

using namespace xview;
using namespace xview::harness;

namespace {

TrainConfig tiny_config(uint64_t seed = 11) {
  TrainConfig cfg;
  cfg.seed = seed;
  cfg.train_scenes = 6;
  cfg.eval_scenes = 2;
  cfg.steps = 4;
  cfg.batch = 2;
  cfg.vqa_per_pair = 1;
  cfg.scene.min_objects = 3;
  cfg.scene.max_objects = 5;
  cfg.scene.views = 2;
  cfg.encoder.noise = 0.4;
  cfg.train_cap_per_pair = 1;
  cfg.eval_cap_per_pair = 1;
  return cfg;
}

std::string read_file(const std::string& p) {
  std::ifstream f(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

struct TempDir {
  std::string path;
  explicit TempDir(const std::string& p) : path(p) { std::filesystem::remove_all(path); }
  ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("config key/value round trip") {
  TrainConfig cfg = tiny_config();
  cfg.lambda_tri = 0.25;
  cfg.scene.world_xy = 3.125;
  auto kv = cfg.to_kv();
  auto parsed = TrainConfig::from_kv(KvConfig::parse(kv.serialize()));
  CHECK(parsed.to_kv().serialize() == kv.serialize());
  CHECK(parsed.lambda_tri == 0.25);
  CHECK(parsed.scene.world_xy == 3.125);

  CHECK_THROWS_AS(KvConfig::parse("not a kv line"), ConfigError);
  KvConfig bad;
  bad.set_f64("train.lambda_sc", -1.0);
  CHECK_THROWS_AS(TrainConfig::from_kv(bad), ConfigError);
}

TEST_CASE("end-to-end: gen, train, checkpoint, eval") {
  TempDir tmp("test_harness_tmp");
  TrainConfig cfg = tiny_config();
  auto summary = generate_data(cfg, tmp.path);
  CHECK(summary.train_scenes == 6);
  CHECK(summary.eval_scenes == 2);
  CHECK(summary.train_samples > 0);
  CHECK(summary.eval_samples > 0);

  auto data = DataStore::open(tmp.path);
  CHECK(data.split_ids("train").size() == 6);

  // generated corpora validate and are scene-disjoint
  const auto train_vec = data.split_ids("train");
  std::set<int64_t> train_ids(train_vec.begin(), train_vec.end());
  for (const auto& rec : data.corpus("eval")) CHECK(!train_ids.count(rec.sample.scene_id));
  for (const auto& rec : data.corpus("train")) CHECK(train_ids.count(rec.sample.scene_id));

  auto result = train(cfg, data);
  CHECK(result.trace.size() == 4);
  for (const auto& log : result.trace) {
    CHECK(std::isfinite(log.total));
    // total equals the lambda-weighted component sum
    const double recomputed =
        cfg.lambda_vqa * log.vqa + cfg.lambda_sc * log.sc + cfg.lambda_tri * log.tri;
    CHECK(std::fabs(log.total - recomputed) <= 1e-12);
  }

  save_checkpoint(tmp.path + "/ckpt", result.checkpoint);
  auto loaded = load_checkpoint(tmp.path + "/ckpt");
  CHECK(loaded.step == result.checkpoint.step);
  save_checkpoint(tmp.path + "/ckpt2", loaded);
  CHECK(read_file(tmp.path + "/ckpt/manifest.txt") == read_file(tmp.path + "/ckpt2/manifest.txt"));
  CHECK(read_file(tmp.path + "/ckpt/params.blob") == read_file(tmp.path + "/ckpt2/params.blob"));

  auto model = model_from_checkpoint(loaded);
  auto corpus = data.corpus("eval");
  auto report = evaluate(model, data, corpus, retr::MatchMode::kGreedy, loaded.train_scene_ids);
  CHECK(report.overall.total == static_cast<int>(corpus.size()));
  CHECK(report.retrieval_total > 0);

  // order invariance
  auto shuffled = corpus;
  std::reverse(shuffled.begin(), shuffled.end());
  auto report2 = evaluate(model, data, shuffled, retr::MatchMode::kGreedy,
                          loaded.train_scene_ids);
  CHECK(report.overall.correct == report2.overall.correct);
  CHECK(report.retrieval_hits == report2.retrieval_hits);

  // contamination guard
  CHECK_THROWS_AS(
      evaluate(model, data, data.corpus("train"), retr::MatchMode::kGreedy,
               loaded.train_scene_ids),
      ContaminationError);
}

TEST_CASE("training is deterministic and resume matches the uninterrupted run") {
  TempDir tmp("test_harness_det_tmp");
  TrainConfig cfg = tiny_config(21);
  generate_data(cfg, tmp.path);
  auto data = DataStore::open(tmp.path);

  auto full = train(cfg, data);
  auto again = train(cfg, data);
  CHECK(format_trace(full.trace) == format_trace(again.trace));
  save_checkpoint(tmp.path + "/full", full.checkpoint);
  save_checkpoint(tmp.path + "/again", again.checkpoint);
  CHECK(read_file(tmp.path + "/full/params.blob") == read_file(tmp.path + "/again/params.blob"));
  CHECK(read_file(tmp.path + "/full/manifest.txt") ==
        read_file(tmp.path + "/again/manifest.txt"));

  // stop at step 2, resume to 4
  auto first_half = train(cfg, data, nullptr, 2);
  Checkpoint mid = first_half.checkpoint;
  auto second_half = train(cfg, data, &mid);
  std::vector<StepLog> stitched = first_half.trace;
  stitched.insert(stitched.end(), second_half.trace.begin(), second_half.trace.end());
  CHECK(format_trace(stitched) == format_trace(full.trace));
  save_checkpoint(tmp.path + "/resumed", second_half.checkpoint);
  CHECK(read_file(tmp.path + "/resumed/params.blob") ==
        read_file(tmp.path + "/full/params.blob"));
}

TEST_CASE("lambda_sc = lambda_tri = 0 degenerates to pure VQA training") {
  TempDir tmp("test_harness_vqa_tmp");
  TrainConfig cfg = tiny_config(31);
  cfg.lambda_sc = 0.0;
  cfg.lambda_tri = 0.0;
  cfg.steps = 2;
  generate_data(cfg, tmp.path);
  auto data = DataStore::open(tmp.path);
  auto result = train(cfg, data);
  for (const auto& log : result.trace) {
    CHECK(log.sc == 0.0);
    CHECK(log.tri == 0.0);
    CHECK(log.total == doctest::Approx(cfg.lambda_vqa * log.vqa));
  }
}

TEST_CASE("orthogonal appearances at zero noise are retrievable untrained") {
  TrainConfig cfg = tiny_config(77);
  cfg.scene.appearance = scene::SceneConfig::Appearance::kOrthonormal;
  cfg.scene.min_objects = 3;
  cfg.scene.max_objects = 5;
  // objects large enough to own interior feature cells in every view, and
  // only substantially visible instances enter the correspondence set
  cfg.scene.min_half = 0.55;
  cfg.scene.max_half = 1.0;
  cfg.scene.overlap_budget = 0.0;
  cfg.scene.cam_dist_min = 6.0;
  cfg.scene.cam_dist_max = 8.0;
  cfg.scene.focal_min = 460;
  cfg.scene.focal_max = 540;
  cfg.scene.min_visible_pixels = 150;
  cfg.encoder.noise = 0.0;
  auto model = Model::init(cfg);
  int hits = 0, total = 0;
  for (uint64_t seed = 1; seed <= 45; ++seed) {
    auto sc = scene::generate_scene(cfg.scene, mix_seed(900, seed), static_cast<int64_t>(seed));
    std::vector<scene::FeatureMap> feats;
    for (const auto& v : sc.views) feats.push_back(render_feature_map(v, sc, cfg.encoder));
    num::Graph g;
    auto pf = build_pair_forward(g, model, sc, feats, 0, 1, retr::MatchMode::kGreedy, false);
    for (const auto& [i, j] : pf.gold_pairs) {
      // a heavily occluded sliver carries its occluder's content; identity is
      // only recoverable by construction for substantially visible objects
      if (sc.projections[0][i].visible_fraction < 0.35 ||
          sc.projections[1][j].visible_fraction < 0.35)
        continue;
      int argmax = 0;
      for (int c = 1; c < pf.similarity.cols(); ++c)
        if (pf.similarity.at(i, c) > pf.similarity.at(i, argmax)) argmax = c;
      hits += argmax == j ? 1 : 0;
      total++;
    }
  }
  CAPTURE(hits);
  CAPTURE(total);
  CHECK(total > 40);
  CHECK(static_cast<double>(hits) / total >= 0.95);
}

TEST_CASE("checkpoint version mismatch is refused naming both versions") {
  TempDir tmp("test_harness_ver_tmp");
  TrainConfig cfg = tiny_config(41);
  Checkpoint ckpt;
  ckpt.cfg = cfg;
  Rng rng(1);
  ckpt.params.add("w", num::uniform_init({2, 2}, 1.0, rng));
  save_checkpoint(tmp.path + "/c", ckpt);

  // corrupt the version field
  auto manifest = read_file(tmp.path + "/c/manifest.txt");
  manifest.replace(manifest.find("version 1"), 9, "version 9");
  std::ofstream(tmp.path + "/c/manifest.txt", std::ios::binary) << manifest;
  try {
    load_checkpoint(tmp.path + "/c");
    FAIL("expected version refusal");
  } catch (const IoError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("9") != std::string::npos);
    CHECK(msg.find("1") != std::string::npos);
  }

  // corrupt manifest -> refuse, no partial state
  std::ofstream(tmp.path + "/c/manifest.txt", std::ios::binary) << "tensor broken";
  CHECK_THROWS_AS(load_checkpoint(tmp.path + "/c"), IoError);
}
