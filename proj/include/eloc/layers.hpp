#pragma once

#include <vector>

#include "eloc/graph.hpp"

namespace eloc {

// Edge-to-edge filters. Row filter f weights the in-row neighborhood of node
// i, the column filter weights the in-column neighborhood of node j; the bias
// is added once per output entry.
struct E2EParams {
    Tensor row_filters;  // {F, N}
    Tensor col_filters;  // {F, N}
    Tensor bias;         // {F}
};

// Edge-to-node filters. Channel-wise by default (filters {F, N}: filter f
// reads feature map f only); an {F, F, N} filter tensor selects the
// channel-mixing variant.
struct E2NParams {
    Tensor filters;
    Tensor bias;  // {F}
};

struct N2GParams {
    Tensor filters;  // {F, N}
    Tensor bias;     // {F}
};

struct LstmLayerParams {
    Tensor w_input;   // {input_size, 4H}, gate order (input, forget, cell, output)
    Tensor w_hidden;  // {H, 4H}
    Tensor bias;      // {4H}

    int hidden_size() const { return bias.dim(0) / 4; }
    int input_size() const { return w_input.dim(0); }
};

struct LstmParams {
    std::vector<LstmLayerParams> layers;  // two layers: F -> H1 -> 2
};

// Per-window attention weights, each length T, positive, summing to 1.
struct AttentionPair {
    Tensor language;  // {T}
    Tensor motor;     // {T}
};

// H^f_{i,j} = phi(sum_n r^f_n W_{i,n} + c^f_n W_{n,j} + b_f). Returns the F
// stacked feature maps as {F, N, N}. Adjoints flow into the parameters only;
// the connectivity input is observed data and must not require grad.
Tensor e2e_forward(Graph& g, const Tensor& w, const E2EParams& params, double slope);

// h^f_i = phi(sum_n g^f_n H^f_{i,n} + p_f), input {F, N, N}, output {F, N}.
Tensor e2n_forward(Graph& g, const Tensor& maps, const E2NParams& params, double slope);

// q^f = phi(sum_n k^f_n h^f_n + d_f), input {F, N}, output {F}.
Tensor n2g_forward(Graph& g, const Tensor& node_features, const N2GParams& params, double slope);

// Shared affine map + LeakyReLU applied independently at every node.
Tensor nodewise_fc(Graph& g, const Tensor& x, const Tensor& weights, const Tensor& bias,
                   double slope);
// Affine only (used by the classification heads; scores stay raw).
Tensor nodewise_affine(Graph& g, const Tensor& x, const Tensor& weights, const Tensor& bias);

// E2E followed by channel-wise E2N without materializing the {F, N, N}
// feature maps; output is {F, N} as with e2n_forward. Matches the composed
// layers to floating-point roundoff (covered by tests).
Tensor e2e_e2n_fused(Graph& g, const Tensor& w, const E2EParams& e2e, const E2NParams& e2n,
                     double slope);

// Two stacked LSTM layers over the window sequence followed by a softmax
// over the time axis of each output column; column 0 is the language
// attention, column 1 the motor attention.
AttentionPair lstm_attention(Graph& g, const Tensor& q_seq, const LstmParams& params);

}  // namespace eloc
