#include "xview/params.hpp"

#include <cmath>

#include "xview/errors.hpp"

namespace xview::num {

int ParamSet::add(const std::string& name, Tensor init) {
  if (has(name)) throw ConfigError("duplicate parameter '" + name + "'");
  Entry e;
  e.name = name;
  e.grad = Tensor::zeros(init.shape);
  e.value = std::move(init);
  entries_.push_back(std::move(e));
  index_[name] = static_cast<int>(entries_.size()) - 1;
  return index_[name];
}

int ParamSet::find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? -1 : it->second;
}

Tensor& ParamSet::value(const std::string& name) {
  int i = find(name);
  if (i < 0) throw ConfigError("unknown parameter '" + name + "'");
  return entries_[i].value;
}

const Tensor& ParamSet::value(const std::string& name) const {
  int i = find(name);
  if (i < 0) throw ConfigError("unknown parameter '" + name + "'");
  return entries_[i].value;
}

Tensor& ParamSet::grad(const std::string& name) {
  int i = find(name);
  if (i < 0) throw ConfigError("unknown parameter '" + name + "'");
  return entries_[i].grad;
}

int64_t ParamSet::total_elements() const {
  int64_t n = 0;
  for (const auto& e : entries_) n += e.value.numel();
  return n;
}

void ParamSet::zero_grad() {
  for (auto& e : entries_)
    for (auto& v : e.grad.data) v = 0.0;
}

Tensor xavier_init(int fan_in, int fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / (fan_in + fan_out));
  Tensor t({fan_in, fan_out});
  for (auto& v : t.data) v = rng.uniform(-bound, bound);
  return t;
}

Tensor uniform_init(std::vector<int> shape, double scale, Rng& rng) {
  Tensor t(std::move(shape));
  for (auto& v : t.data) v = rng.uniform(-scale, scale);
  return t;
}

double cosine_lr(const OptimState& opt, int64_t t) {
  if (opt.total_steps <= 0) return opt.base_lr;
  if (t >= opt.total_steps) return 0.0;
  const double frac = static_cast<double>(t) / static_cast<double>(opt.total_steps);
  return opt.base_lr * 0.5 * (1.0 + std::cos(M_PI * frac));
}

void adamw_step(ParamSet& params, OptimState& opt) {
  if (opt.base_lr <= 0.0) throw ConfigError("learning rate must be > 0");
  if (opt.m.size() != static_cast<size_t>(params.size())) {
    opt.m.assign(params.size(), Tensor());
    opt.v.assign(params.size(), Tensor());
    for (int i = 0; i < params.size(); ++i) {
      opt.m[i] = Tensor::zeros(params.entry(i).value.shape);
      opt.v[i] = Tensor::zeros(params.entry(i).value.shape);
    }
  }
  const int64_t t = params.step;
  const double lr = cosine_lr(opt, t);
  const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(t + 1));
  const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(t + 1));
  for (int i = 0; i < params.size(); ++i) {
    auto& e = params.entry(i);
    auto& m = opt.m[i];
    auto& v = opt.v[i];
    for (size_t j = 0; j < e.value.data.size(); ++j) {
      const double g = e.grad.data[j];
      m.data[j] = opt.beta1 * m.data[j] + (1.0 - opt.beta1) * g;
      v.data[j] = opt.beta2 * v.data[j] + (1.0 - opt.beta2) * g * g;
      const double mhat = m.data[j] / bc1;
      const double vhat = v.data[j] / bc2;
      e.value.data[j] -= lr * (mhat / (std::sqrt(vhat) + opt.eps) + opt.weight_decay * e.value.data[j]);
    }
  }
  params.step = t + 1;
}

}  // namespace xview::num
