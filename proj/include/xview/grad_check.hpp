#pragma once

#include <functional>
#include <string>

#include "xview/graph.hpp"
#include "xview/params.hpp"

namespace xview::num {

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst_param;
  int64_t worst_index = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  int64_t checked = 0;
};

// Compares analytic gradients against central differences over every
// parameter element, or a seeded sample when the set exceeds max_elements.
// Relative error uses max(1, |analytic|, |numeric|) in the denominator so
// near-zero gradients are judged on absolute error.
GradCheckReport grad_check(const std::function<Var(Graph&, ParamSet&)>& loss_fn, ParamSet& params,
                           double eps, uint64_t sample_seed = 1, int64_t max_elements = 10000);

}  // namespace xview::num
