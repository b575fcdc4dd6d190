#include "rt/baselines.hpp"

#include "rt/error.hpp"

namespace rt {

BaselineLayerWeights::BaselineLayerWeights(std::size_t d_n_, std::size_t d_e_, Rng& rng)
    : d_n(d_n_), d_e(d_e_) {
    w_msg = glorot_tensor(d_e + 2 * d_n, d_n, rng);
    b_msg = zeros({d_n}, true);
    w_a = glorot_tensor(2 * d_n, d_n, rng);
    b_a = zeros({d_n}, true);
    w_b = glorot_tensor(d_n, d_n, rng);
    b_b = zeros({d_n}, true);
}

void BaselineLayerWeights::for_each_param(const std::function<void(TensorPtr&)>& fn) {
    fn(w_msg);
    fn(b_msg);
    fn(w_a);
    fn(b_a);
    fn(w_b);
    fn(b_b);
}

namespace {

void check_widths(const Graph& g, const BaselineLayerWeights& w) {
    if (g.node_width() != w.d_n || g.edge_width() != w.d_e) {
        throw ShapeError("baseline layer: graph widths d_n=" + std::to_string(g.node_width()) +
                         ", d_e=" + std::to_string(g.edge_width()) + " vs weights d_n=" +
                         std::to_string(w.d_n) + ", d_e=" + std::to_string(w.d_e));
    }
}

// n' = n + ReLU(concat(n, m) W_a + b_a) W_b + b_b
TensorPtr node_phi(const TensorPtr& nodes, const TensorPtr& messages,
                   const BaselineLayerWeights& w) {
    TensorPtr hidden = relu(add_bias(matmul(concat_last_axis({nodes, messages}), w.w_a), w.b_a));
    return add(add_bias(matmul(hidden, w.w_b), w.b_b), nodes);
}

}  // namespace

TensorPtr deepsets_layer(const Graph& g, const BaselineLayerWeights& w) {
    check_widths(g, w);
    const std::size_t n = g.num_nodes;
    TensorPtr e_flat = reshape(g.edge_feats, {n * n, w.d_e});
    std::vector<std::size_t> self_idx(n);
    for (std::size_t i = 0; i < n; ++i) {
        self_idx[i] = i * n + i;
    }
    TensorPtr locale =
        concat_last_axis({gather_rows(e_flat, self_idx), g.node_feats, g.node_feats});
    TensorPtr msg = relu(add_bias(matmul(locale, w.w_msg), w.b_msg));
    return node_phi(g.node_feats, msg, w);
}

TensorPtr mpnn_layer(const Graph& g, const BaselineLayerWeights& w) {
    check_widths(g, w);
    const std::size_t n = g.num_nodes;
    TensorPtr e_flat = reshape(g.edge_feats, {n * n, w.d_e});
    std::vector<std::size_t> idx_i(n * n), idx_j(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            idx_i[i * n + j] = i;
            idx_j[i * n + j] = j;
        }
    }
    TensorPtr locale = concat_last_axis(
        {e_flat, gather_rows(g.node_feats, idx_i), gather_rows(g.node_feats, idx_j)});
    TensorPtr msg = relu(add_bias(matmul(locale, w.w_msg), w.b_msg));
    TensorPtr pooled = max_over_axis(reshape(msg, {n, n, w.d_n}), 1);
    return node_phi(g.node_feats, pooled, w);
}

TensorPtr vanilla_transformer_layer(const Graph& g_nodes_only, const AttentionWeights& w,
                                    const NodeUpdateWeights& nu) {
    if (w.d_e != 0 || g_nodes_only.edge_width() != 0) {
        throw ShapeError("vanilla_transformer_layer: edge width must be 0, got weights d_e=" +
                         std::to_string(w.d_e) + ", graph d_e=" +
                         std::to_string(g_nodes_only.edge_width()));
    }
    return attend(g_nodes_only, w, nu);
}

}  // namespace rt
