#pragma once

#include <array>
#include <vector>

#include "rt/graph.hpp"
#include "rt/tensor.hpp"

namespace rt {

// Multi-head relational attention weights. Each projection is split into a
// node part and an edge part; stacking them row-wise recovers the single
// concatenated-input matrix, which is what qkv_concat does.
struct AttentionWeights {
    std::size_t heads = 1;
    std::size_t head_dim = 1;
    std::size_t d_n = 0;
    std::size_t d_e = 0;

    // per head: node and edge projections plus one shared bias per projection
    std::vector<TensorPtr> w_node_q, w_node_k, w_node_v;  // d_n×d_h each
    std::vector<TensorPtr> w_edge_q, w_edge_k, w_edge_v;  // d_e×d_h each
    std::vector<TensorPtr> b_q, b_k, b_v;                 // d_h each
    TensorPtr w_out;                                      // (H·d_h)×d_n
    TensorPtr b_out;                                      // d_n

    AttentionWeights() = default;
    AttentionWeights(std::size_t d_n, std::size_t d_e, std::size_t heads, std::size_t head_dim,
                     Rng& rng);

    void for_each_param(const std::function<void(TensorPtr&)>& fn);
};

// Transformer node-update stack: residual + LayerNorm around the attention
// output, then a ReLU feed-forward with its own residual + LayerNorm.
struct NodeUpdateWeights {
    std::size_t d_n = 0;
    std::size_t d_nh = 0;

    TensorPtr w1, b1;                  // d_n×d_n
    TensorPtr w2, b2;                  // d_n×d_nh
    TensorPtr w3, b3;                  // d_nh×d_n
    TensorPtr ln1_gain, ln1_bias;
    TensorPtr ln2_gain, ln2_bias;

    NodeUpdateWeights() = default;
    NodeUpdateWeights(std::size_t d_n, std::size_t d_nh, Rng& rng);

    void for_each_param(const std::function<void(TensorPtr&)>& fn);
};

struct PairQkv {
    TensorPtr q, k, v;  // each N×N×d_h; entry (i,j) is the pair projection
};

// Split form: q_ij = n_i W_n^Q + e_ij W_e^Q (+ bias), and analogously for
// k/v with n_j. Note q varies with j through the edge vector.
PairQkv qkv_split(const Graph& g, const AttentionWeights& w, std::size_t head);

// Concatenated reference form: q_ij = [n_i, e_ij] W^Q with W stacked from
// the split matrices. Exists to cross-validate the split implementation.
PairQkv qkv_concat(const Graph& g, const AttentionWeights& w, std::size_t head);

// softmax_j((q_ij · k_ij) / sqrt(d_h)); optional N×N mask (1 keep / 0 drop).
TensorPtr attention_scores(const TensorPtr& q, const TensorPtr& k,
                           const TensorPtr& mask = nullptr);

// The four addends of q_ij·k_ij: node-node, node-edge, edge-node, edge-edge.
// Computed without biases; emulates prior-work variants term by term.
struct DotExpansion {
    std::array<double, 4> terms{};
    double total = 0.0;
};
DotExpansion dot_expand4(const std::vector<double>& n_i, const std::vector<double>& n_j,
                         const std::vector<double>& e_ij, const AttentionWeights& w,
                         std::size_t head);

struct AttendOptions {
    double dropout_rate = 0.0;
    Rng* rng = nullptr;           // required when dropout_rate > 0
    const TensorPtr* mask = nullptr;  // N×N attention mask
};

// One full relational-attention node update: per-head pair attention,
// head concat + output projection, then the residual/LayerNorm stack.
// With d_e = 0 this is exactly the standard transformer layer.
TensorPtr attend(const Graph& g, const AttentionWeights& w, const NodeUpdateWeights& nu,
                 const AttendOptions& opts = {});

}  // namespace rt
