#pragma once

#include "rt/attention.hpp"
#include "rt/graph.hpp"
#include "rt/tensor.hpp"

namespace rt {

// Shared layer weights for the GNN baselines. The message function is
// ReLU(concat(e, n_i, n_j) W_m + b_m) with output width d_n; the node update
// is a residual single-hidden-layer MLP, identical across baselines.
struct BaselineLayerWeights {
    std::size_t d_n = 0;
    std::size_t d_e = 0;

    TensorPtr w_msg, b_msg;  // (d_e+2d_n)×d_n
    TensorPtr w_a, b_a;      // (2d_n)×d_n
    TensorPtr w_b, b_b;      // d_n×d_n

    BaselineLayerWeights() = default;
    BaselineLayerWeights(std::size_t d_n, std::size_t d_e, Rng& rng);

    void for_each_param(const std::function<void(TensorPtr&)>& fn);
};

// Deep Sets: the only edge in node i's locale is the self-connection, so the
// message is ψ(e_ii, n_i, n_i) and rows are updated independently.
TensorPtr deepsets_layer(const Graph& g, const BaselineLayerWeights& w);

// MPNN over the complete pair grid: m_i = elementwise max_j ψ(e_ij, n_i, n_j).
TensorPtr mpnn_layer(const Graph& g, const BaselineLayerWeights& w);

// The edge-free standard transformer layer. Shares the relational-attention
// code path (d_e must be 0), which is what guarantees the reduction property.
TensorPtr vanilla_transformer_layer(const Graph& g_nodes_only, const AttentionWeights& w,
                                    const NodeUpdateWeights& nu);

}  // namespace rt
