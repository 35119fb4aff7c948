#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "xview/rng.hpp"
#include "xview/tensor.hpp"

namespace xview::num {

// Named parameter tensors with paired gradient buffers.
class ParamSet {
 public:
  struct Entry {
    std::string name;
    Tensor value;
    Tensor grad;
  };

  int add(const std::string& name, Tensor init);
  int find(const std::string& name) const;  // -1 if absent
  bool has(const std::string& name) const { return find(name) >= 0; }

  Tensor& value(const std::string& name);
  const Tensor& value(const std::string& name) const;
  Tensor& grad(const std::string& name);

  Entry& entry(int i) { return entries_[i]; }
  const Entry& entry(int i) const { return entries_[i]; }
  int size() const { return static_cast<int>(entries_.size()); }
  int64_t total_elements() const;

  void zero_grad();

  int64_t step = 0;

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, int> index_;
};

// Uniform +-sqrt(6/(fan_in+fan_out)) init for weight matrices.
Tensor xavier_init(int fan_in, int fan_out, Rng& rng);
Tensor uniform_init(std::vector<int> shape, double scale, Rng& rng);

struct OptimState {
  double base_lr = 1e-4;
  int64_t total_steps = 1;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
};

// base * 0.5 * (1 + cos(pi * t / T)), clamped to 0 past T.
double cosine_lr(const OptimState& opt, int64_t t);

// Decoupled weight decay update; consumes ParamSet.step as t.
void adamw_step(ParamSet& params, OptimState& opt);

}  // namespace xview::num
