#include "xview/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "xview/errors.hpp"
#include "xview/relations.hpp"

namespace fs = std::filesystem;

namespace xview::harness {

DataStore DataStore::open(const std::string& root) {
  DataStore ds;
  ds.root = root;
  std::ifstream sf(fs::path(root) / "splits.txt", std::ios::binary);
  if (!sf) throw IoError("missing splits.txt in " + root);
  std::stringstream ss;
  ss << sf.rdbuf();
  ds.splits = qa::SplitManifest::parse(ss.str());
  ds.config = KvConfig::parse_file((fs::path(root) / "config.txt").string());
  return ds;
}

std::string DataStore::scene_dir(int64_t scene_id) const {
  std::ostringstream os;
  os << "scene_" << std::setw(5) << std::setfill('0') << scene_id;
  return (fs::path(root) / "scenes" / os.str()).string();
}

const scene::SceneBundle& DataStore::bundle(int64_t scene_id) const {
  auto it = cache_.find(scene_id);
  if (it == cache_.end())
    it = cache_.emplace(scene_id, scene::load_scene_bundle(scene_dir(scene_id))).first;
  return it->second;
}

std::vector<qa::CorpusRecord> DataStore::corpus(const std::string& split) const {
  return qa::load_corpus((fs::path(root) / (split + ".jsonl")).string());
}

std::vector<int64_t> DataStore::split_ids(const std::string& split) const {
  const auto* s = splits.find(split);
  if (!s) throw ConfigError("unknown split '" + split + "'");
  return s->scene_ids;
}

GenSummary generate_data(const TrainConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  GenSummary summary;
  const int total = cfg.train_scenes + cfg.eval_scenes;
  if (total < 2) throw ConfigError("need at least one train and one eval scene");

  fs::create_directories(fs::path(out_dir) / "scenes");
  std::vector<int64_t> ids;
  for (int i = 0; i < total; ++i) ids.push_back(i);

  DataStore ds;
  ds.root = out_dir;
  for (int64_t id : ids) {
    scene::Scene sc = scene::generate_scene(cfg.scene, mix_seed(cfg.seed, 0x5ceull, id), id);
    std::vector<scene::FeatureMap> feats;
    for (const auto& view : sc.views) feats.push_back(render_feature_map(view, sc, cfg.encoder));
    scene::save_scene_bundle(ds.scene_dir(id), sc, feats);
  }

  const double train_ratio = static_cast<double>(cfg.train_scenes) / total;
  auto manifest = qa::build_split(
      ids, {{"train", train_ratio}, {"eval", 1.0 - train_ratio}}, cfg.seed);
  {
    std::ofstream sf(fs::path(out_dir) / "splits.txt", std::ios::binary);
    sf << manifest.serialize();
  }
  {
    std::ofstream cf(fs::path(out_dir) / "config.txt", std::ios::binary);
    cf << cfg.to_kv().serialize();
  }

  int split_index = 0;
  for (const auto& split : manifest.splits) {
    Rng rng(mix_seed(cfg.seed, 0x9aull, split_index++));
    const bool is_train = split.name == "train";
    std::vector<qa::QASample> samples;
    for (int64_t id : split.scene_ids) {
      const auto bundle = scene::load_scene_bundle(ds.scene_dir(id));
      const auto rel = scene::geometric_relations(bundle.scene);
      for (int task = 1; task <= 17; ++task) {
        const int cap = !is_train ? cfg.eval_cap_per_pair
                        : qa::task_category(task) == qa::TaskCategory::kCorrespondence
                            ? cfg.train_cap_correspondence
                            : cfg.train_cap_per_pair;
        auto generated = qa::instantiate_qa(bundle.scene, rel, task, rng, cap);
        for (auto& s : generated) {
          if (!qa::validate_sample(s, bundle.scene, rel).empty())
            throw GenerationError("generated sample fails validation: " + s.sample_id);
          samples.push_back(std::move(s));
        }
      }
    }
    samples = qa::balance_gold_classes(std::move(samples), rng);
    std::vector<qa::CorpusRecord> records;
    for (auto& s : samples) {
      qa::CorpusRecord rec;
      std::ostringstream rel_path;
      rel_path << "scenes/scene_" << std::setw(5) << std::setfill('0') << s.scene_id;
      rec.bundle_path = rel_path.str();
      rec.sample = std::move(s);
      records.push_back(std::move(rec));
    }
    qa::save_corpus((fs::path(out_dir) / (split.name + ".jsonl")).string(), records);
    if (split.name == "train") {
      summary.train_samples = records.size();
      summary.train_scenes = static_cast<int>(split.scene_ids.size());
    } else {
      summary.eval_samples = records.size();
      summary.eval_scenes = static_cast<int>(split.scene_ids.size());
    }
  }
  return summary;
}

std::string format_trace(const std::vector<StepLog>& trace) {
  std::ostringstream os;
  os << "# step total vqa sc tri lr\n";
  for (const auto& s : trace)
    os << s.step << " " << scene::format_double(s.total) << " " << scene::format_double(s.vqa)
       << " " << scene::format_double(s.sc) << " " << scene::format_double(s.tri) << " "
       << scene::format_double(s.lr) << "\n";
  return os.str();
}

namespace {

struct PairKey {
  int64_t scene;
  int va, vb;
  bool operator<(const PairKey& o) const {
    return std::tie(scene, va, vb) < std::tie(o.scene, o.va, o.vb);
  }
};

}  // namespace

TrainResult train(const TrainConfig& cfg_in, const DataStore& data, const Checkpoint* resume,
                  int64_t stop_after) {
  const TrainConfig cfg = resume ? resume->cfg : cfg_in;
  cfg.validate();
  const int64_t stop_step = stop_after < 0 ? cfg.steps : std::min(stop_after, cfg.steps);

  Model m = Model::init(cfg);
  num::OptimState opt;
  opt.base_lr = cfg.lr;
  opt.total_steps = cfg.steps;
  opt.weight_decay = cfg.weight_decay;
  Rng rng(mix_seed(cfg.seed, 0x7247ull));

  if (resume) {
    if (resume->params.size() != m.params.size())
      throw ConfigError("resume checkpoint does not match the model parameter set");
    for (int i = 0; i < m.params.size(); ++i)
      m.params.entry(i).value = resume->params.value(m.params.entry(i).name);
    m.params.step = resume->step;
    if (!resume->opt.m.empty()) {
      opt.m.resize(m.params.size());
      opt.v.resize(m.params.size());
      for (int i = 0; i < m.params.size(); ++i) {
        const int src = resume->params.find(m.params.entry(i).name);
        opt.m[i] = resume->opt.m[src];
        opt.v[i] = resume->opt.v[src];
      }
    }
    rng.set_state(resume->rng_state);
  }

  const auto train_ids = data.split_ids("train");
  std::vector<PairKey> pairs;
  for (int64_t id : train_ids) {
    const auto& bundle = data.bundle(id);
    const int nviews = static_cast<int>(bundle.scene.views.size());
    for (int va = 0; va < nviews; ++va)
      for (int vb = va + 1; vb < nviews; ++vb) pairs.push_back({id, va, vb});
  }
  if (pairs.empty()) throw ConfigError("train split has no scene pairs");

  std::map<PairKey, std::vector<qa::CorpusRecord>> samples_by_pair;
  for (auto& rec : data.corpus("train"))
    samples_by_pair[{rec.sample.scene_id, rec.sample.view_a, rec.sample.view_b}].push_back(rec);

  TrainResult result;
  for (int64_t step = m.params.step; step < stop_step; ++step) {
    // all stochastic picks happen before the graph is built
    struct Pick {
      PairKey key;
      bool use_gold;
      std::vector<int> sample_idx;
    };
    std::vector<Pick> picks;
    for (int b = 0; b < cfg.batch; ++b) {
      Pick p;
      p.key = pairs[rng.below(pairs.size())];
      p.use_gold = rng.uniform() >= cfg.retrieved_pi_fraction;
      auto it = samples_by_pair.find(p.key);
      if (it != samples_by_pair.end() && !it->second.empty()) {
        std::vector<int> all(it->second.size());
        for (size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
        for (size_t i = 0; i < all.size() && i < static_cast<size_t>(cfg.vqa_per_pair); ++i) {
          const size_t j = i + rng.below(all.size() - i);
          std::swap(all[i], all[j]);
        }
        all.resize(std::min<size_t>(all.size(), cfg.vqa_per_pair));
        p.sample_idx = std::move(all);
      }
      picks.push_back(std::move(p));
    }

    num::Graph g;
    std::vector<num::Var> vqa_terms, sc_terms, tri_terms;
    for (const auto& pick : picks) {
      const auto& bundle = data.bundle(pick.key.scene);
      PairForward pf = build_pair_forward(g, m, bundle.scene, bundle.features, pick.key.va,
                                          pick.key.vb, cfg.match_mode, pick.use_gold);
      if (cfg.lambda_sc > 0 && pf.za && pf.zb &&
          pf.za->value.rows() + pf.zb->value.rows() >= 2) {
        std::vector<int64_t> labels = pf.tracks_a;
        labels.insert(labels.end(), pf.tracks_b.begin(), pf.tracks_b.end());
        num::Var z = concat_rows(g, {pf.za, pf.zb});
        sc_terms.push_back(ocva::supcon_loss(g, z, labels, cfg.ocva.tau).loss);
      }
      if (cfg.lambda_tri > 0 && pf.za && pf.zb)
        tri_terms.push_back(
            ocva::triplet_loss(g, pf.za, pf.zb, pf.gold_pairs, cfg.ocva.margin).loss);
      if (cfg.lambda_vqa > 0 && !pick.sample_idx.empty()) {
        const auto& recs = samples_by_pair[pick.key];
        std::vector<num::Var> losses;
        for (int idx : pick.sample_idx) {
          auto dist = score_sample(g, m, pf, recs[idx].sample);
          losses.push_back(reason::vqa_loss(g, dist, recs[idx].sample.gold));
        }
        num::Var sum = losses[0];
        for (size_t i = 1; i < losses.size(); ++i) sum = add(g, sum, losses[i]);
        vqa_terms.push_back(scale(g, sum, 1.0 / losses.size()));
      }
    }

    auto mean_of = [&](std::vector<num::Var>& terms) -> num::Var {
      if (terms.empty()) return g.constant(num::Tensor::scalar(0.0));
      num::Var sum = terms[0];
      for (size_t i = 1; i < terms.size(); ++i) sum = add(g, sum, terms[i]);
      return scale(g, sum, 1.0 / terms.size());
    };
    num::Var vqa_mean = mean_of(vqa_terms);
    num::Var sc_mean = mean_of(sc_terms);
    num::Var tri_mean = mean_of(tri_terms);
    num::Var total = add(g, add(g, scale(g, vqa_mean, cfg.lambda_vqa),
                                scale(g, sc_mean, cfg.lambda_sc)),
                         scale(g, tri_mean, cfg.lambda_tri));

    StepLog log;
    log.step = step;
    log.vqa = vqa_mean->value.data[0];
    log.sc = sc_mean->value.data[0];
    log.tri = tri_mean->value.data[0];
    log.total = total->value.data[0];
    log.lr = num::cosine_lr(opt, step);
    if (!std::isfinite(log.total))
      throw NumericError("non-finite loss at step " + std::to_string(step) + " (vqa=" +
                         std::to_string(log.vqa) + ", sc=" + std::to_string(log.sc) +
                         ", tri=" + std::to_string(log.tri) + ")");

    m.params.zero_grad();
    g.backward(total);
    num::adamw_step(m.params, opt);
    result.trace.push_back(log);
  }

  result.checkpoint.version = kCheckpointVersion;
  result.checkpoint.step = m.params.step;
  result.checkpoint.rng_state = rng.state();
  result.checkpoint.cfg = cfg;
  result.checkpoint.params = m.params;
  result.checkpoint.opt = opt;
  result.checkpoint.train_scene_ids = train_ids;
  return result;
}

EvalReport::Stat EvalReport::category(qa::TaskCategory cat) const {
  Stat s;
  for (const auto& [task, stat] : per_task) {
    if (qa::task_category(task) != cat) continue;
    s.total += stat.total;
    s.correct += stat.correct;
  }
  return s;
}

std::string EvalReport::text_table() const {
  std::ostringstream os;
  os << "mode: " << retr::match_mode_name(mode) << "\n";
  os << std::left << std::setw(8) << "task" << std::setw(16) << "category" << std::setw(8)
     << "count" << "accuracy\n";
  for (const auto& [task, stat] : per_task) {
    os << std::left << std::setw(8) << qa::task_name(task) << std::setw(16)
       << qa::task_category_name(qa::task_category(task)) << std::setw(8) << stat.total
       << std::fixed << std::setprecision(4) << stat.accuracy() << "\n";
  }
  for (auto cat : {qa::TaskCategory::kCorrespondence, qa::TaskCategory::kVisOcc,
                   qa::TaskCategory::kGeometric, qa::TaskCategory::kPhysical}) {
    const Stat s = category(cat);
    os << std::left << std::setw(8) << "-" << std::setw(16) << qa::task_category_name(cat)
       << std::setw(8) << s.total << std::fixed << std::setprecision(4) << s.accuracy() << "\n";
  }
  os << std::left << std::setw(8) << "-" << std::setw(16) << "Overall" << std::setw(8)
     << overall.total << std::fixed << std::setprecision(4) << overall.accuracy() << "\n";
  os << "retrieval top-1: " << std::fixed << std::setprecision(4) << retrieval_top1() << " over "
     << retrieval_total << " anchors (chance " << std::setprecision(4) << retrieval_chance()
     << ")\n";
  return os.str();
}

std::string EvalReport::to_json_lines() const {
  std::ostringstream os;
  for (const auto& [task, stat] : per_task) {
    nlohmann::json j;
    j["kind"] = "task";
    j["task"] = qa::task_name(task);
    j["category"] = qa::task_category_name(qa::task_category(task));
    j["count"] = stat.total;
    j["correct"] = stat.correct;
    j["accuracy"] = stat.accuracy();
    os << j.dump() << "\n";
  }
  for (auto cat : {qa::TaskCategory::kCorrespondence, qa::TaskCategory::kVisOcc,
                   qa::TaskCategory::kGeometric, qa::TaskCategory::kPhysical}) {
    const Stat s = category(cat);
    nlohmann::json j;
    j["kind"] = "category";
    j["category"] = qa::task_category_name(cat);
    j["count"] = s.total;
    j["correct"] = s.correct;
    j["accuracy"] = s.accuracy();
    os << j.dump() << "\n";
  }
  nlohmann::json j;
  j["kind"] = "overall";
  j["mode"] = retr::match_mode_name(mode);
  j["count"] = overall.total;
  j["correct"] = overall.correct;
  j["accuracy"] = overall.accuracy();
  j["retrieval_top1"] = retrieval_top1();
  j["retrieval_anchors"] = retrieval_total;
  j["retrieval_chance"] = retrieval_chance();
  os << j.dump() << "\n";
  return os.str();
}

EvalReport evaluate(Model& m, const DataStore& data, const std::vector<qa::CorpusRecord>& corpus,
                    retr::MatchMode mode, const std::vector<int64_t>& train_scene_ids) {
  std::set<int64_t> train_set(train_scene_ids.begin(), train_scene_ids.end());
  std::set<int64_t> offending;
  for (const auto& rec : corpus)
    if (train_set.count(rec.sample.scene_id)) offending.insert(rec.sample.scene_id);
  if (!offending.empty()) {
    std::ostringstream os;
    os << "evaluation corpus shares scene ids with the training manifest:";
    for (int64_t id : offending) os << " " << id;
    throw ContaminationError(os.str());
  }

  std::map<PairKey, std::vector<const qa::CorpusRecord*>> groups;
  for (const auto& rec : corpus)
    groups[{rec.sample.scene_id, rec.sample.view_a, rec.sample.view_b}].push_back(&rec);

  EvalReport report;
  report.mode = mode;
  for (const auto& [key, recs] : groups) {
    const auto& bundle = data.bundle(key.scene);
    num::Graph g;
    PairForward pf =
        build_pair_forward(g, m, bundle.scene, bundle.features, key.va, key.vb, mode, false);

    for (const auto& [i, j] : pf.gold_pairs) {
      int argmax = 0;
      for (int c = 1; c < pf.similarity.cols(); ++c)
        if (pf.similarity.at(i, c) > pf.similarity.at(i, argmax)) argmax = c;
      report.retrieval_hits += argmax == j ? 1 : 0;
      report.retrieval_total += 1;
      report.retrieval_chance_sum += 1.0 / pf.similarity.cols();
    }

    for (const auto* rec : recs) {
      auto dist = score_sample(g, m, pf, rec->sample);
      const bool correct = dist.predicted == rec->sample.gold;
      report.per_task[rec->sample.task_id].total++;
      report.per_task[rec->sample.task_id].correct += correct ? 1 : 0;
      report.overall.total++;
      report.overall.correct += correct ? 1 : 0;
    }
  }
  return report;
}

Model model_from_checkpoint(const Checkpoint& ckpt) {
  Model m = Model::init(ckpt.cfg);
  if (ckpt.params.size() != m.params.size())
    throw ConfigError("checkpoint parameter set does not match the model");
  for (int i = 0; i < m.params.size(); ++i)
    m.params.entry(i).value = ckpt.params.value(m.params.entry(i).name);
  m.params.step = ckpt.step;
  return m;
}

}  // namespace xview::harness
