#include "xview/config.hpp"

#include <fstream>
#include <sstream>

#include "xview/errors.hpp"
#include "xview/scene_io.hpp"

namespace xview::harness {

KvConfig KvConfig::parse(const std::string& text) {
  KvConfig cfg;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    lineno++;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      bool blank = true;
      for (char c : line) blank &= std::isspace(static_cast<unsigned char>(c)) != 0;
      if (blank) continue;
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    auto trim = [](std::string s) {
      size_t b = 0, e = s.size();
      while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) b++;
      while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) e--;
      return s.substr(b, e - b);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    cfg.values[key] = value;
  }
  return cfg;
}

KvConfig KvConfig::parse_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read config " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse(ss.str());
}

std::string KvConfig::serialize() const {
  std::ostringstream os;
  for (const auto& [k, v] : values) os << k << " = " << v << "\n";
  return os.str();
}

std::string KvConfig::get_str(const std::string& key, const std::string& fallback) const {
  auto it = values.find(key);
  return it == values.end() ? fallback : it->second;
}

int64_t KvConfig::get_int(const std::string& key, int64_t fallback) const {
  auto it = values.find(key);
  if (it == values.end()) return fallback;
  try {
    return std::stoll(it->second);
  } catch (...) {
    throw ConfigError("key '" + key + "': expected an integer, got '" + it->second + "'");
  }
}

uint64_t KvConfig::get_u64(const std::string& key, uint64_t fallback) const {
  auto it = values.find(key);
  if (it == values.end()) return fallback;
  try {
    return std::stoull(it->second);
  } catch (...) {
    throw ConfigError("key '" + key + "': expected an unsigned integer, got '" + it->second + "'");
  }
}

double KvConfig::get_f64(const std::string& key, double fallback) const {
  auto it = values.find(key);
  if (it == values.end()) return fallback;
  try {
    return std::stod(it->second);
  } catch (...) {
    throw ConfigError("key '" + key + "': expected a number, got '" + it->second + "'");
  }
}

void KvConfig::set_int(const std::string& key, int64_t v) { values[key] = std::to_string(v); }
void KvConfig::set_u64(const std::string& key, uint64_t v) { values[key] = std::to_string(v); }
void KvConfig::set_f64(const std::string& key, double v) { values[key] = scene::format_double(v); }

void TrainConfig::validate() const {
  if (lambda_vqa < 0 || lambda_sc < 0 || lambda_tri < 0)
    throw ConfigError("loss weights must be >= 0");
  if (steps < 1) throw ConfigError("steps must be >= 1");
  if (batch < 1) throw ConfigError("batch must be >= 1");
  if (lr <= 0) throw ConfigError("learning rate must be > 0");
  if (ocva.tau <= 0) throw ConfigError("supcon temperature must be > 0");
  if (ocva.margin < 0) throw ConfigError("triplet margin must be >= 0");
  if (art.K < 1 || art.P < 1 || art.s_max < 1) throw ConfigError("bad art configuration");
  if (scene.views < 2) throw ConfigError("scenes need at least 2 views");
  if (scene.image_h % scene.patch || scene.image_w % scene.patch)
    throw ConfigError("image size must be a multiple of the patch size");
}

KvConfig TrainConfig::to_kv() const {
  KvConfig kv;
  kv.set_f64("train.lambda_vqa", lambda_vqa);
  kv.set_f64("train.lambda_sc", lambda_sc);
  kv.set_f64("train.lambda_tri", lambda_tri);
  kv.set_int("train.steps", steps);
  kv.set_int("train.batch", batch);
  kv.set_u64("train.seed", seed);
  kv.set_str("train.match_mode", retr::match_mode_name(match_mode));
  kv.set_f64("train.retrieved_pi_fraction", retrieved_pi_fraction);
  kv.set_int("train.vqa_per_pair", vqa_per_pair);
  kv.set_f64("train.match_threshold", match_threshold);
  kv.set_f64("train.lr", lr);
  kv.set_f64("train.weight_decay", weight_decay);
  kv.set_int("model.d_c", d_c);

  kv.set_int("data.train_scenes", train_scenes);
  kv.set_int("data.eval_scenes", eval_scenes);
  kv.set_int("data.train_cap_per_pair", train_cap_per_pair);
  kv.set_int("data.train_cap_correspondence", train_cap_correspondence);
  kv.set_int("data.eval_cap_per_pair", eval_cap_per_pair);

  kv.set_int("scene.min_objects", scene.min_objects);
  kv.set_int("scene.max_objects", scene.max_objects);
  kv.set_int("scene.views", scene.views);
  kv.set_int("scene.image_h", scene.image_h);
  kv.set_int("scene.image_w", scene.image_w);
  kv.set_int("scene.patch", scene.patch);
  kv.set_f64("scene.world_xy", scene.world_xy);
  kv.set_f64("scene.world_z", scene.world_z);
  kv.set_f64("scene.min_half", scene.min_half);
  kv.set_f64("scene.max_half", scene.max_half);
  kv.set_f64("scene.overlap_budget", scene.overlap_budget);
  kv.set_int("scene.d_app", scene.d_app);
  kv.set_f64("scene.category_spread", scene.category_spread);
  kv.set_str("scene.appearance",
             scene.appearance == scene::SceneConfig::Appearance::kOrthonormal ? "orthonormal"
                                                                              : "random");
  kv.set_int("scene.max_place_retries", scene.max_place_retries);
  kv.set_f64("scene.cam_dist_min", scene.cam_dist_min);
  kv.set_f64("scene.cam_dist_max", scene.cam_dist_max);
  kv.set_f64("scene.focal_min", scene.focal_min);
  kv.set_f64("scene.focal_max", scene.focal_max);
  kv.set_f64("scene.look_jitter", scene.look_jitter);
  kv.set_f64("scene.cam_z_max", scene.cam_z_max);
  kv.set_int("scene.min_visible_pixels", scene.min_visible_pixels);

  kv.set_int("encoder.d_v", encoder.d_v);
  kv.set_f64("encoder.noise", encoder.noise);
  kv.set_f64("encoder.background_scale", encoder.background_scale);
  kv.set_u64("encoder.lift_seed", encoder.lift_seed);

  kv.set_int("art.k", art.K);
  kv.set_int("art.pad", art.pad);
  kv.set_int("art.s_max", art.s_max);
  kv.set_int("art.kmeans_iters", art.kmeans_iters);
  kv.set_int("art.pos_grid", art.pos_grid);
  kv.set_int("art.mlp_hidden", art.mlp_hidden);

  kv.set_int("ocva.heads", ocva.heads);
  kv.set_int("ocva.depth", ocva.depth);
  kv.set_f64("ocva.tau", ocva.tau);
  kv.set_f64("ocva.margin", ocva.margin);
  kv.set_int("ocva.ffn_mult", ocva.ffn_mult);

  kv.set_int("reason.d_r", reasoner.d_r);
  kv.set_int("reason.adapter_hidden", reasoner.adapter_hidden);
  kv.set_int("reason.scorer_heads", reasoner.scorer_heads);
  kv.set_int("reason.max_seq", reasoner.max_seq);
  return kv;
}

TrainConfig TrainConfig::from_kv(const KvConfig& kv) {
  TrainConfig c;
  c.lambda_vqa = kv.get_f64("train.lambda_vqa", c.lambda_vqa);
  c.lambda_sc = kv.get_f64("train.lambda_sc", c.lambda_sc);
  c.lambda_tri = kv.get_f64("train.lambda_tri", c.lambda_tri);
  c.steps = kv.get_int("train.steps", c.steps);
  c.batch = static_cast<int>(kv.get_int("train.batch", c.batch));
  c.seed = kv.get_u64("train.seed", c.seed);
  auto mode = retr::parse_match_mode(kv.get_str("train.match_mode", "greedy"));
  if (!mode) throw ConfigError("train.match_mode must be gt, greedy or hungarian");
  c.match_mode = *mode;
  c.retrieved_pi_fraction = kv.get_f64("train.retrieved_pi_fraction", c.retrieved_pi_fraction);
  c.vqa_per_pair = static_cast<int>(kv.get_int("train.vqa_per_pair", c.vqa_per_pair));
  c.match_threshold = kv.get_f64("train.match_threshold", c.match_threshold);
  c.lr = kv.get_f64("train.lr", c.lr);
  c.weight_decay = kv.get_f64("train.weight_decay", c.weight_decay);
  c.d_c = static_cast<int>(kv.get_int("model.d_c", c.d_c));

  c.train_scenes = static_cast<int>(kv.get_int("data.train_scenes", c.train_scenes));
  c.eval_scenes = static_cast<int>(kv.get_int("data.eval_scenes", c.eval_scenes));
  c.train_cap_per_pair = static_cast<int>(kv.get_int("data.train_cap_per_pair", c.train_cap_per_pair));
  c.train_cap_correspondence = static_cast<int>(kv.get_int("data.train_cap_correspondence", c.train_cap_correspondence));
  c.eval_cap_per_pair = static_cast<int>(kv.get_int("data.eval_cap_per_pair", c.eval_cap_per_pair));

  c.scene.min_objects = static_cast<int>(kv.get_int("scene.min_objects", c.scene.min_objects));
  c.scene.max_objects = static_cast<int>(kv.get_int("scene.max_objects", c.scene.max_objects));
  c.scene.views = static_cast<int>(kv.get_int("scene.views", c.scene.views));
  c.scene.image_h = static_cast<int>(kv.get_int("scene.image_h", c.scene.image_h));
  c.scene.image_w = static_cast<int>(kv.get_int("scene.image_w", c.scene.image_w));
  c.scene.patch = static_cast<int>(kv.get_int("scene.patch", c.scene.patch));
  c.scene.world_xy = kv.get_f64("scene.world_xy", c.scene.world_xy);
  c.scene.world_z = kv.get_f64("scene.world_z", c.scene.world_z);
  c.scene.min_half = kv.get_f64("scene.min_half", c.scene.min_half);
  c.scene.max_half = kv.get_f64("scene.max_half", c.scene.max_half);
  c.scene.overlap_budget = kv.get_f64("scene.overlap_budget", c.scene.overlap_budget);
  c.scene.d_app = static_cast<int>(kv.get_int("scene.d_app", c.scene.d_app));
  c.scene.category_spread = kv.get_f64("scene.category_spread", c.scene.category_spread);
  const std::string app = kv.get_str("scene.appearance", "random");
  if (app == "orthonormal")
    c.scene.appearance = scene::SceneConfig::Appearance::kOrthonormal;
  else if (app == "random")
    c.scene.appearance = scene::SceneConfig::Appearance::kRandomUnit;
  else
    throw ConfigError("scene.appearance must be random or orthonormal");
  c.scene.max_place_retries =
      static_cast<int>(kv.get_int("scene.max_place_retries", c.scene.max_place_retries));
  c.scene.cam_dist_min = kv.get_f64("scene.cam_dist_min", c.scene.cam_dist_min);
  c.scene.cam_dist_max = kv.get_f64("scene.cam_dist_max", c.scene.cam_dist_max);
  c.scene.focal_min = kv.get_f64("scene.focal_min", c.scene.focal_min);
  c.scene.focal_max = kv.get_f64("scene.focal_max", c.scene.focal_max);
  c.scene.look_jitter = kv.get_f64("scene.look_jitter", c.scene.look_jitter);
  c.scene.cam_z_max = kv.get_f64("scene.cam_z_max", c.scene.cam_z_max);
  c.scene.min_visible_pixels =
      static_cast<int>(kv.get_int("scene.min_visible_pixels", c.scene.min_visible_pixels));

  c.encoder.d_v = static_cast<int>(kv.get_int("encoder.d_v", c.encoder.d_v));
  c.encoder.noise = kv.get_f64("encoder.noise", c.encoder.noise);
  c.encoder.background_scale = kv.get_f64("encoder.background_scale", c.encoder.background_scale);
  c.encoder.lift_seed = kv.get_u64("encoder.lift_seed", c.encoder.lift_seed);
  c.encoder.patch = c.scene.patch;

  c.art.K = static_cast<int>(kv.get_int("art.k", c.art.K));
  c.art.pad = static_cast<int>(kv.get_int("art.pad", c.art.pad));
  c.art.s_max = static_cast<int>(kv.get_int("art.s_max", c.art.s_max));
  c.art.kmeans_iters = static_cast<int>(kv.get_int("art.kmeans_iters", c.art.kmeans_iters));
  c.art.pos_grid = static_cast<int>(kv.get_int("art.pos_grid", c.art.pos_grid));
  c.art.mlp_hidden = static_cast<int>(kv.get_int("art.mlp_hidden", c.art.mlp_hidden));
  c.art.P = c.scene.patch;
  c.art.d_v = c.encoder.d_v;

  c.ocva.heads = static_cast<int>(kv.get_int("ocva.heads", c.ocva.heads));
  c.ocva.depth = static_cast<int>(kv.get_int("ocva.depth", c.ocva.depth));
  c.ocva.tau = kv.get_f64("ocva.tau", c.ocva.tau);
  c.ocva.margin = kv.get_f64("ocva.margin", c.ocva.margin);
  c.ocva.ffn_mult = static_cast<int>(kv.get_int("ocva.ffn_mult", c.ocva.ffn_mult));
  c.ocva.d_v = c.encoder.d_v;

  c.reasoner.d_r = static_cast<int>(kv.get_int("reason.d_r", c.reasoner.d_r));
  c.reasoner.adapter_hidden =
      static_cast<int>(kv.get_int("reason.adapter_hidden", c.reasoner.adapter_hidden));
  c.reasoner.scorer_heads =
      static_cast<int>(kv.get_int("reason.scorer_heads", c.reasoner.scorer_heads));
  c.reasoner.max_seq = static_cast<int>(kv.get_int("reason.max_seq", c.reasoner.max_seq));
  c.reasoner.d_v = c.encoder.d_v;
  c.reasoner.region_tokens = c.art.K;

  c.validate();
  return c;
}

}  // namespace xview::harness
