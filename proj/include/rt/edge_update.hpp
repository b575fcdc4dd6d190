#pragma once

#include "rt/tensor.hpp"

namespace rt {

// Per-layer edge update: a ReLU-linear message over the edge's locale
// (itself, its reverse edge, its two endpoint nodes), then the same
// residual/LayerNorm stack transformers use for nodes.
struct EdgeUpdateWeights {
    std::size_t d_n = 0;
    std::size_t d_e = 0;
    std::size_t d_eh1 = 0;
    std::size_t d_eh2 = 0;

    TensorPtr w4, b4;  // (2d_e+2d_n)×d_eh1
    TensorPtr w5, b5;  // d_eh1×d_e
    TensorPtr w6, b6;  // d_e×d_eh2
    TensorPtr w7, b7;  // d_eh2×d_e
    TensorPtr ln1_gain, ln1_bias;
    TensorPtr ln2_gain, ln2_bias;

    EdgeUpdateWeights() = default;
    EdgeUpdateWeights(std::size_t d_n, std::size_t d_e, std::size_t d_eh1, std::size_t d_eh2,
                      Rng& rng);

    void for_each_param(const std::function<void(TensorPtr&)>& fn);
};

// m_ij = ReLU(concat(e_ij, e_ji, n_i', n_j') W_4 + b_4) for a single pair.
// Node inputs are this layer's already-updated node vectors.
TensorPtr edge_message(const TensorPtr& e_ij, const TensorPtr& e_ji, const TensorPtr& n_i,
                       const TensorPtr& n_j, const EdgeUpdateWeights& w);

// Synchronous update of all N² directed pairs (self-pairs included) from the
// pre-update edge tensor. edges: N×N×d_e, nodes_updated: N×d_n.
TensorPtr edge_update(const TensorPtr& edges, const TensorPtr& nodes_updated,
                      const EdgeUpdateWeights& w);

}  // namespace rt
