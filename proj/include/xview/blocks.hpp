#pragma once

#include <string>
#include <vector>

#include "xview/graph.hpp"

namespace xview::num {

// Registers w1/b1/w2/b2 under a prefix if absent.
void add_mlp_params(ParamSet& ps, const std::string& prefix, int d_in, int hidden, int d_out,
                    Rng& rng);

// y = W2 * gelu(W1 * x + b1) + b2, row-wise.
Var mlp_forward(Graph& g, Var x, ParamSet& ps, const std::string& prefix, int hidden);

void add_mha_params(ParamSet& ps, const std::string& prefix, int d, Rng& rng);

// Scaled dot-product cross-attention with an output projection. Invalid keys
// get attention weight exactly 0; if no key is valid, the output is all-zero
// (projection bias included).
Var mha_forward(Graph& g, Var q, Var k, Var v, ParamSet& ps, const std::string& prefix, int heads,
                const std::vector<uint8_t>& key_validity);

void add_layer_norm_params(ParamSet& ps, const std::string& prefix, int d);

}  // namespace xview::num
