#include "xview/checkpoint.hpp"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "xview/errors.hpp"
#include "xview/scene_io.hpp"

namespace fs = std::filesystem;

namespace xview::harness {

namespace {

void write_blob(std::ostream& os, const num::Tensor& t) {
  for (double v : t.data) {
    uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
    os.write(b, 8);
  }
}

void read_blob(std::istream& is, num::Tensor& t) {
  for (double& v : t.data) {
    char b[8];
    is.read(b, 8);
    uint64_t bits = 0;
    for (int i = 0; i < 8; ++i)
      bits |= static_cast<uint64_t>(static_cast<unsigned char>(b[i])) << (8 * i);
    std::memcpy(&v, &bits, sizeof(v));
  }
}

struct TensorRecord {
  std::string name;  // "p:", "m:" or "v:" prefix
  std::vector<int> shape;
};

}  // namespace

void save_checkpoint(const std::string& dir, const Checkpoint& ckpt) {
  fs::create_directories(dir);

  std::vector<int> order(ckpt.params.size());
  for (int i = 0; i < ckpt.params.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return ckpt.params.entry(a).name < ckpt.params.entry(b).name;
  });

  const bool has_opt = !ckpt.opt.m.empty();
  std::ostringstream mf;
  mf << "version " << ckpt.version << "\n";
  mf << "step " << ckpt.step << "\n";
  mf << "rng " << ckpt.rng_state[0] << " " << ckpt.rng_state[1] << " " << ckpt.rng_state[2] << " "
     << ckpt.rng_state[3] << "\n";
  mf << "trainscenes";
  for (int64_t id : ckpt.train_scene_ids) mf << " " << id;
  mf << "\n";
  for (const auto& [k, v] : ckpt.cfg.to_kv().values) mf << "cfg " << k << " = " << v << "\n";

  int64_t offset = 0;
  auto emit_tensor = [&](const std::string& prefixed, const num::Tensor& t) {
    mf << "tensor " << prefixed << " " << t.shape.size();
    for (int d : t.shape) mf << " " << d;
    mf << " " << offset << "\n";
    offset += t.numel();
  };
  for (int i : order) emit_tensor("p:" + ckpt.params.entry(i).name, ckpt.params.entry(i).value);
  if (has_opt) {
    for (int i : order) emit_tensor("m:" + ckpt.params.entry(i).name, ckpt.opt.m[i]);
    for (int i : order) emit_tensor("v:" + ckpt.params.entry(i).name, ckpt.opt.v[i]);
  }

  {
    std::ofstream f(fs::path(dir) / "manifest.txt", std::ios::binary);
    if (!f) throw IoError("cannot write checkpoint manifest in " + dir);
    f << mf.str();
  }
  {
    std::ofstream f(fs::path(dir) / "params.blob", std::ios::binary);
    if (!f) throw IoError("cannot write checkpoint blob in " + dir);
    for (int i : order) write_blob(f, ckpt.params.entry(i).value);
    if (has_opt) {
      for (int i : order) write_blob(f, ckpt.opt.m[i]);
      for (int i : order) write_blob(f, ckpt.opt.v[i]);
    }
  }
}

Checkpoint load_checkpoint(const std::string& dir) {
  std::ifstream mf(fs::path(dir) / "manifest.txt", std::ios::binary);
  if (!mf) throw IoError("cannot read checkpoint manifest in " + dir);

  Checkpoint ckpt;
  KvConfig kv;
  std::vector<TensorRecord> records;
  std::string line;
  bool got_version = false;
  while (std::getline(mf, line)) {
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind == "version") {
      ls >> ckpt.version;
      got_version = true;
      if (ckpt.version != kCheckpointVersion)
        throw IoError("checkpoint version " + std::to_string(ckpt.version) +
                      " does not match supported version " + std::to_string(kCheckpointVersion));
    } else if (kind == "step") {
      ls >> ckpt.step;
    } else if (kind == "rng") {
      ls >> ckpt.rng_state[0] >> ckpt.rng_state[1] >> ckpt.rng_state[2] >> ckpt.rng_state[3];
    } else if (kind == "trainscenes") {
      int64_t id;
      while (ls >> id) ckpt.train_scene_ids.push_back(id);
    } else if (kind == "cfg") {
      std::string key, eq;
      ls >> key >> eq;
      std::string value;
      std::getline(ls, value);
      size_t b = value.find_first_not_of(' ');
      kv.values[key] = b == std::string::npos ? "" : value.substr(b);
    } else if (kind == "tensor") {
      TensorRecord rec;
      size_t ndim = 0;
      if (!(ls >> rec.name >> ndim) || ndim > 8)
        throw IoError("corrupt tensor record in checkpoint manifest");
      rec.shape.resize(ndim);
      for (auto& d : rec.shape)
        if (!(ls >> d) || d < 0) throw IoError("corrupt tensor record in checkpoint manifest");
      int64_t offset;
      if (!(ls >> offset)) throw IoError("corrupt tensor record in checkpoint manifest");
      records.push_back(std::move(rec));
    } else if (!kind.empty()) {
      throw IoError("unknown checkpoint record '" + kind + "'");
    }
  }
  if (!got_version) throw IoError("checkpoint manifest missing version");
  ckpt.cfg = TrainConfig::from_kv(kv);

  std::ifstream blob(fs::path(dir) / "params.blob", std::ios::binary);
  if (!blob) throw IoError("cannot read checkpoint blob in " + dir);

  std::vector<std::pair<std::string, num::Tensor>> moments_m, moments_v;
  for (const auto& rec : records) {
    num::Tensor t(rec.shape);
    read_blob(blob, t);
    if (!blob) throw IoError("truncated checkpoint blob (at " + rec.name + ")");
    if (rec.name.rfind("p:", 0) == 0)
      ckpt.params.add(rec.name.substr(2), std::move(t));
    else if (rec.name.rfind("m:", 0) == 0)
      moments_m.emplace_back(rec.name.substr(2), std::move(t));
    else if (rec.name.rfind("v:", 0) == 0)
      moments_v.emplace_back(rec.name.substr(2), std::move(t));
    else
      throw IoError("unknown tensor prefix in '" + rec.name + "'");
  }
  ckpt.params.step = ckpt.step;
  if (!moments_m.empty()) {
    if (moments_m.size() != static_cast<size_t>(ckpt.params.size()) ||
        moments_v.size() != moments_m.size())
      throw IoError("checkpoint optimizer moments do not cover the parameter set");
    ckpt.opt.m.resize(ckpt.params.size());
    ckpt.opt.v.resize(ckpt.params.size());
    for (auto& [name, t] : moments_m) {
      const int idx = ckpt.params.find(name);
      if (idx < 0) throw IoError("moment for unknown parameter '" + name + "'");
      ckpt.opt.m[idx] = std::move(t);
    }
    for (auto& [name, t] : moments_v) {
      const int idx = ckpt.params.find(name);
      if (idx < 0) throw IoError("moment for unknown parameter '" + name + "'");
      ckpt.opt.v[idx] = std::move(t);
    }
  }
  ckpt.opt.base_lr = ckpt.cfg.lr;
  ckpt.opt.total_steps = ckpt.cfg.steps;
  ckpt.opt.weight_decay = ckpt.cfg.weight_decay;
  return ckpt;
}

}  // namespace xview::harness
