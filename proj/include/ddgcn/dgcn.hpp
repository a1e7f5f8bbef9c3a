#pragma once

#include <vector>

#include "ddgcn/tensor.hpp"

namespace ddgcn {

// D^{-1/2} (A + I) D^{-1/2} with D the row sums of A + I, applied verbatim
// to asymmetric A as well. Row sums accumulate in sorted order, so relabeling
// nodes relabels the result exactly. Gradient flows through both the entries
// and the degree terms.
Tensor normalize_adjacency(const Tensor& a);

// H^{k+1} = A_hat H^k: propagation only, no parameters, no activation.
Tensor propagate(const Tensor& h, const Tensor& a_hat);

// relu(A_hat H W): the coupled layer used by the plain-GCN variant.
Tensor gcn_layer(const Tensor& h, const Tensor& a_hat, const Tensor& w);

// Per-node sigmoid retention over depths: out[i] = sum_l sigma(H^l_i . c) *
// H^l_i. stack holds H^0..H^L; c is a d x 1 projection.
Tensor layer_attention(const std::vector<Tensor>& stack, const Tensor& c);

// Mean pairwise cosine similarity over distinct rows; rows with zero norm are
// skipped, and with the flag set the final row (the user node) is ignored.
// Diagnostic only, no gradient.
double smoothness(const Tensor& h, bool exclude_last_row);

}  // namespace ddgcn
