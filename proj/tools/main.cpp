#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

#include <CLI11.hpp>

#include "xview/harness.hpp"
#include "xview/relations.hpp"

namespace fs = std::filesystem;
using namespace xview;

namespace {

harness::TrainConfig load_config(const std::string& path, uint64_t seed_override, bool has_seed) {
  harness::KvConfig kv;
  if (!path.empty()) kv = harness::KvConfig::parse_file(path);
  if (has_seed) kv.set_u64("train.seed", seed_override);
  return harness::TrainConfig::from_kv(kv);
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path);
  f << content;
}

int run_gen(const std::string& config_path, const std::string& out, uint64_t seed, bool has_seed) {
  auto cfg = load_config(config_path, seed, has_seed);
  auto summary = harness::generate_data(cfg, out);
  std::cout << "scenes: " << summary.train_scenes << " train, " << summary.eval_scenes
            << " eval\n";
  std::cout << "samples: " << summary.train_samples << " train, " << summary.eval_samples
            << " eval\n";
  std::cout << "wrote " << out << "\n";
  return 0;
}

int run_train(const std::string& data_dir, const std::string& out, const std::string& config_path,
              uint64_t seed, bool has_seed, int64_t steps, const std::string& resume_dir) {
  auto data = harness::DataStore::open(data_dir);
  harness::KvConfig kv = data.config;
  if (!config_path.empty()) {
    auto overrides = harness::KvConfig::parse_file(config_path);
    for (const auto& [k, v] : overrides.values) kv.values[k] = v;
  }
  if (has_seed) kv.set_u64("train.seed", seed);
  if (steps >= 0) kv.set_int("train.steps", steps);
  auto cfg = harness::TrainConfig::from_kv(kv);

  harness::TrainResult result;
  if (!resume_dir.empty()) {
    auto ckpt = harness::load_checkpoint(resume_dir);
    result = harness::train(cfg, data, &ckpt);
  } else {
    result = harness::train(cfg, data);
  }
  fs::create_directories(out);
  harness::save_checkpoint((fs::path(out) / "checkpoint").string(), result.checkpoint);
  write_file((fs::path(out) / "loss_trace.txt").string(), harness::format_trace(result.trace));
  if (!result.trace.empty())
    std::cout << "final loss " << result.trace.back().total << " after "
              << result.trace.back().step + 1 << " steps\n";
  std::cout << "wrote " << out << "/checkpoint\n";
  return 0;
}

int run_eval(const std::string& data_dir, const std::string& ckpt_dir, const std::string& mode,
             const std::string& split, const std::string& out) {
  auto data = harness::DataStore::open(data_dir);
  auto ckpt = harness::load_checkpoint(ckpt_dir);
  auto model = harness::model_from_checkpoint(ckpt);
  auto corpus = data.corpus(split);

  std::vector<retr::MatchMode> modes;
  if (mode == "both") {
    modes = {retr::MatchMode::kGreedy, retr::MatchMode::kHungarian};
  } else {
    auto parsed = retr::parse_match_mode(mode);
    if (!parsed) throw ConfigError("--mode must be greedy, hungarian, gt or both");
    modes = {*parsed};
  }
  fs::create_directories(out);
  for (auto m : modes) {
    auto report = harness::evaluate(model, data, corpus, m, ckpt.train_scene_ids);
    const std::string suffix = retr::match_mode_name(m);
    write_file((fs::path(out) / ("report_" + suffix + ".txt")).string(), report.text_table());
    write_file((fs::path(out) / ("report_" + suffix + ".jsonl")).string(),
               report.to_json_lines());
    std::cout << report.text_table() << "\n";
  }
  return 0;
}

int run_match(const std::string& data_dir, const std::string& ckpt_dir, int64_t scene_id,
              int view_a, int view_b, const std::string& mode, double threshold) {
  auto data = harness::DataStore::open(data_dir);
  auto ckpt = harness::load_checkpoint(ckpt_dir);
  auto model = harness::model_from_checkpoint(ckpt);
  model.cfg.match_threshold = threshold;
  auto parsed = retr::parse_match_mode(mode);
  if (!parsed) throw ConfigError("--mode must be greedy, hungarian or gt");

  const auto& bundle = data.bundle(scene_id);
  num::Graph g;
  auto pf = harness::build_pair_forward(g, model, bundle.scene, bundle.features, view_a, view_b,
                                        *parsed, false);

  std::cout << "similarity (rows: view " << view_a << " tracks, cols: view " << view_b
            << " tracks)\n";
  std::cout << std::setw(8) << "";
  for (int64_t t : pf.tracks_b) std::cout << std::setw(9) << ("t" + std::to_string(t));
  std::cout << "\n";
  for (size_t i = 0; i < pf.tracks_a.size(); ++i) {
    std::cout << std::setw(8) << ("t" + std::to_string(pf.tracks_a[i]));
    for (size_t j = 0; j < pf.tracks_b.size(); ++j)
      std::cout << std::setw(9) << std::fixed << std::setprecision(4) << pf.similarity.at(i, j);
    std::cout << "\n";
  }
  std::cout << "pi (" << retr::match_mode_name(pf.applied_pi.mode) << ")\n";
  for (size_t i = 0; i < pf.applied_pi.target_for_row.size(); ++i) {
    const int j = pf.applied_pi.target_for_row[i];
    std::cout << "  row " << i << " (track " << pf.tracks_a[i] << ") -> ";
    if (j < 0)
      std::cout << "unmatched\n";
    else
      std::cout << "col " << j << " (track " << pf.tracks_b[j] << ") score " << std::fixed
                << std::setprecision(4) << pf.similarity.at(i, j) << "\n";
  }
  std::cout << "total score " << std::fixed << std::setprecision(4) << pf.applied_pi.total_score
            << "\n";
  return 0;
}

int run_inspect(const std::string& data_dir, const std::string& ckpt_dir,
                const std::string& sample_id, const std::string& split) {
  auto data = harness::DataStore::open(data_dir);
  auto ckpt = harness::load_checkpoint(ckpt_dir);
  auto model = harness::model_from_checkpoint(ckpt);

  auto corpus = data.corpus(split);
  const qa::CorpusRecord* found = nullptr;
  for (const auto& rec : corpus)
    if (rec.sample.sample_id == sample_id) found = &rec;
  if (!found) throw ConfigError("sample '" + sample_id + "' not found in split " + split);
  const auto& s = found->sample;

  const auto& bundle = data.bundle(s.scene_id);
  num::Graph g;
  auto pf = harness::build_pair_forward(g, model, bundle.scene, bundle.features, s.view_a,
                                        s.view_b, model.cfg.match_mode, false);

  std::cout << "sample " << s.sample_id << " (" << qa::task_name(s.task_id) << ", scene "
            << s.scene_id << ", views " << s.view_a << "/" << s.view_b << ")\n";
  std::cout << "question: " << s.question << "\n";
  for (size_t r = 0; r < s.region_refs.size(); ++r) {
    const auto& ref = s.region_refs[r];
    const auto& proj = bundle.scene.projections[ref.view_id][ref.object_index];
    std::cout << "  region " << r << ": view " << ref.view_id << " object " << ref.object_index
              << " track " << proj.track_id << "\n";
    art::TokenizeDebug dbg;
    num::Graph scratch;
    art::tokenize_region(scratch, bundle.features[ref.view_id], proj.mask, model.cfg.art,
                         model.params,
                         mix_seed(bundle.scene.seed, ref.view_id, proj.track_id, 0xA47ull), &dbg);
    std::cout << "    crop s=" << dbg.geometry.s << " resized " << dbg.geometry.h_r << "x"
              << dbg.geometry.w_r << " kept cells:";
    for (const auto& [cr, cc] : dbg.kept_cells) std::cout << " (" << cr << "," << cc << ")";
    std::cout << "\n";
  }

  auto input = harness::assemble_sample_input(g, model, pf, s);
  std::cout << "slot map (" << input.slot_map.size() << " region positions):\n";
  for (const auto& slot : input.slot_map)
    std::cout << "  position " << slot.position << " <- region " << slot.region << "\n";
  auto dist = reason::score_answers(g, input, s.options, model.vocab, model.params,
                                    model.cfg.reasoner);
  std::cout << "options:\n";
  for (size_t i = 0; i < s.options.size(); ++i)
    std::cout << "  [" << i << "] p=" << std::fixed << std::setprecision(4) << dist.probs[i]
              << (static_cast<int>(i) == s.gold ? " (gold)" : "") << " " << s.options[i] << "\n";
  std::cout << "predicted: " << dist.predicted << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cross-view scene synthesis, alignment training and evaluation"};
  app.require_subcommand(1);

  std::string config_path, out_dir, data_dir, ckpt_dir, mode = "greedy", split = "eval";
  std::string sample_id, resume_dir;
  uint64_t seed = 0;
  bool has_seed = false;
  int64_t steps = -1;
  int64_t scene_id = 0;
  int view_a = 0, view_b = 1;
  double threshold = -1.0;

  auto* gen = app.add_subcommand("gen", "generate scenes, features and QA corpora");
  gen->add_option("--config", config_path, "key = value config file");
  gen->add_option("--out", out_dir, "output dataset directory")->required();
  gen->add_option("--seed", seed, "seed override")
      ->each([&](const std::string&) { has_seed = true; });

  auto* train = app.add_subcommand("train", "train on a generated dataset");
  train->add_option("--data", data_dir, "dataset directory")->required();
  train->add_option("--out", out_dir, "output directory")->required();
  train->add_option("--config", config_path, "config overrides");
  train->add_option("--seed", seed, "seed override")
      ->each([&](const std::string&) { has_seed = true; });
  train->add_option("--steps", steps, "step count override");
  train->add_option("--resume", resume_dir, "checkpoint directory to resume from");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->add_option("--data", data_dir, "dataset directory")->required();
  eval->add_option("--checkpoint", ckpt_dir, "checkpoint directory")->required();
  eval->add_option("--mode", mode, "greedy|hungarian|gt|both");
  eval->add_option("--split", split, "corpus split (default eval)");
  eval->add_option("--out", out_dir, "report directory")->required();

  auto* match = app.add_subcommand("match", "print the similarity matrix and assignment");
  match->add_option("--data", data_dir, "dataset directory")->required();
  match->add_option("--checkpoint", ckpt_dir, "checkpoint directory")->required();
  match->add_option("--scene", scene_id, "scene id")->required();
  match->add_option("--view-a", view_a, "first view");
  match->add_option("--view-b", view_b, "second view");
  match->add_option("--mode", mode, "greedy|hungarian|gt");
  match->add_option("--threshold", threshold, "below-threshold pairs stay unmatched");

  auto* inspect = app.add_subcommand("inspect", "dump one sample's assembly and scores");
  inspect->add_option("--data", data_dir, "dataset directory")->required();
  inspect->add_option("--checkpoint", ckpt_dir, "checkpoint directory")->required();
  inspect->add_option("--sample", sample_id, "sample id")->required();
  inspect->add_option("--split", split, "corpus split (default eval)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return run_gen(config_path, out_dir, seed, has_seed);
    if (train->parsed())
      return run_train(data_dir, out_dir, config_path, seed, has_seed, steps, resume_dir);
    if (eval->parsed()) return run_eval(data_dir, ckpt_dir, mode, split, out_dir);
    if (match->parsed())
      return run_match(data_dir, ckpt_dir, scene_id, view_a, view_b, mode, threshold);
    if (inspect->parsed()) return run_inspect(data_dir, ckpt_dir, sample_id, split);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
