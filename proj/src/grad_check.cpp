#include "xview/grad_check.hpp"

#include <cmath>
#include <vector>

#include "xview/errors.hpp"
#include "xview/rng.hpp"

namespace xview::num {

namespace {

double eval_loss(const std::function<Var(Graph&, ParamSet&)>& loss_fn, ParamSet& ps) {
  Graph g;
  Var loss = loss_fn(g, ps);
  if (loss->value.numel() != 1) throw ShapeError("grad_check: loss must be scalar");
  return loss->value.data[0];
}

}  // namespace

GradCheckReport grad_check(const std::function<Var(Graph&, ParamSet&)>& loss_fn, ParamSet& params,
                           double eps, uint64_t sample_seed, int64_t max_elements) {
  GradCheckReport rep;

  {
    Graph g;
    Var loss = loss_fn(g, params);
    if (loss->value.numel() != 1) throw ShapeError("grad_check: loss must be scalar");
    if (!std::isfinite(loss->value.data[0]))
      throw NumericError("grad_check aborted: non-finite loss " +
                         std::to_string(loss->value.data[0]));
    params.zero_grad();
    g.backward(loss);
  }
  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (int i = 0; i < params.size(); ++i) analytic.push_back(params.entry(i).grad);

  std::vector<std::pair<int, int64_t>> coords;
  for (int i = 0; i < params.size(); ++i)
    for (int64_t j = 0; j < params.entry(i).value.numel(); ++j) coords.emplace_back(i, j);

  if (static_cast<int64_t>(coords.size()) > max_elements) {
    Rng rng(mix_seed(sample_seed, 0x6772616463686bull));
    for (int64_t i = 0; i < max_elements; ++i) {
      const uint64_t j = i + rng.below(coords.size() - i);
      std::swap(coords[i], coords[j]);
    }
    coords.resize(max_elements);
  }

  for (const auto& [pi, ei] : coords) {
    double& slot = params.entry(pi).value.data[ei];
    const double orig = slot;
    slot = orig + eps;
    const double lp = eval_loss(loss_fn, params);
    slot = orig - eps;
    const double lm = eval_loss(loss_fn, params);
    slot = orig;
    if (!std::isfinite(lp) || !std::isfinite(lm))
      throw NumericError("grad_check aborted: non-finite loss under perturbation of " +
                         params.entry(pi).name);
    const double numeric = (lp - lm) / (2.0 * eps);
    const double a = analytic[pi].data[ei];
    const double denom = std::max({1.0, std::fabs(a), std::fabs(numeric)});
    const double rel = std::fabs(a - numeric) / denom;
    rep.checked++;
    if (rel > rep.max_rel_err) {
      rep.max_rel_err = rel;
      rep.worst_param = params.entry(pi).name;
      rep.worst_index = ei;
      rep.worst_analytic = a;
      rep.worst_numeric = numeric;
    }
  }
  return rep;
}

}  // namespace xview::num
