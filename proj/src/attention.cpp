#include "rt/attention.hpp"

#include <cmath>

#include "rt/error.hpp"

namespace rt {

namespace {

void check_head(const AttentionWeights& w, std::size_t head) {
    if (head >= w.heads) {
        throw ShapeError("attention: head " + std::to_string(head) + " out of " +
                         std::to_string(w.heads));
    }
}

void check_widths(const Graph& g, const AttentionWeights& w) {
    if (g.node_width() != w.d_n || g.edge_width() != w.d_e) {
        throw ShapeError("attention: graph widths d_n=" + std::to_string(g.node_width()) +
                         ", d_e=" + std::to_string(g.edge_width()) + " do not match weights d_n=" +
                         std::to_string(w.d_n) + ", d_e=" + std::to_string(w.d_e));
    }
}

// index vectors mapping flat pair r = i*N + j to its endpoints
std::vector<std::size_t> row_index_i(std::size_t n) {
    std::vector<std::size_t> idx(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            idx[i * n + j] = i;
        }
    }
    return idx;
}

std::vector<std::size_t> row_index_j(std::size_t n) {
    std::vector<std::size_t> idx(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            idx[i * n + j] = j;
        }
    }
    return idx;
}

// one pair projection in split form, flat (N²)×d_h
TensorPtr project_pairs(const TensorPtr& nodes, const TensorPtr& edges_flat,
                        const std::vector<std::size_t>& node_idx, const TensorPtr& w_node,
                        const TensorPtr& w_edge, const TensorPtr& bias) {
    TensorPtr node_part = gather_rows(matmul(nodes, w_node), node_idx);
    if (edges_flat) {
        node_part = add(node_part, matmul(edges_flat, w_edge));
    }
    return add_bias(node_part, bias);
}

std::vector<double> matvec(const Tensor& w, const std::vector<double>& x) {
    const std::size_t rows = w.shape[0], cols = w.shape[1];
    if (x.size() != rows) {
        throw ShapeError("dot_expand4: vector length " + std::to_string(x.size()) +
                         " vs weight " + shape_str(w.shape));
    }
    std::vector<double> out(cols, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            out[c] += x[r] * w.data[r * cols + c];
        }
    }
    return out;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s;
}

}  // namespace

AttentionWeights::AttentionWeights(std::size_t d_n_, std::size_t d_e_, std::size_t heads_,
                                   std::size_t head_dim_, Rng& rng)
    : heads(heads_), head_dim(head_dim_), d_n(d_n_), d_e(d_e_) {
    for (std::size_t h = 0; h < heads; ++h) {
        w_node_q.push_back(glorot_tensor(d_n, head_dim, rng));
        w_edge_q.push_back(glorot_tensor(d_e, head_dim, rng));
        b_q.push_back(zeros({head_dim}, true));
        w_node_k.push_back(glorot_tensor(d_n, head_dim, rng));
        w_edge_k.push_back(glorot_tensor(d_e, head_dim, rng));
        b_k.push_back(zeros({head_dim}, true));
        w_node_v.push_back(glorot_tensor(d_n, head_dim, rng));
        w_edge_v.push_back(glorot_tensor(d_e, head_dim, rng));
        b_v.push_back(zeros({head_dim}, true));
    }
    w_out = glorot_tensor(heads * head_dim, d_n, rng);
    b_out = zeros({d_n}, true);
}

void AttentionWeights::for_each_param(const std::function<void(TensorPtr&)>& fn) {
    for (std::size_t h = 0; h < heads; ++h) {
        fn(w_node_q[h]);
        fn(w_edge_q[h]);
        fn(b_q[h]);
        fn(w_node_k[h]);
        fn(w_edge_k[h]);
        fn(b_k[h]);
        fn(w_node_v[h]);
        fn(w_edge_v[h]);
        fn(b_v[h]);
    }
    fn(w_out);
    fn(b_out);
}

NodeUpdateWeights::NodeUpdateWeights(std::size_t d_n_, std::size_t d_nh_, Rng& rng)
    : d_n(d_n_), d_nh(d_nh_) {
    w1 = glorot_tensor(d_n, d_n, rng);
    b1 = zeros({d_n}, true);
    w2 = glorot_tensor(d_n, d_nh, rng);
    b2 = zeros({d_nh}, true);
    w3 = glorot_tensor(d_nh, d_n, rng);
    b3 = zeros({d_n}, true);
    ln1_gain = full({d_n}, 1.0, true);
    ln1_bias = zeros({d_n}, true);
    ln2_gain = full({d_n}, 1.0, true);
    ln2_bias = zeros({d_n}, true);
}

void NodeUpdateWeights::for_each_param(const std::function<void(TensorPtr&)>& fn) {
    fn(w1);
    fn(b1);
    fn(w2);
    fn(b2);
    fn(w3);
    fn(b3);
    fn(ln1_gain);
    fn(ln1_bias);
    fn(ln2_gain);
    fn(ln2_bias);
}

PairQkv qkv_split(const Graph& g, const AttentionWeights& w, std::size_t head) {
    check_head(w, head);
    check_widths(g, w);
    const std::size_t n = g.num_nodes;
    TensorPtr edges_flat =
        w.d_e > 0 ? reshape(g.edge_feats, {n * n, w.d_e}) : nullptr;
    const auto idx_i = row_index_i(n);
    const auto idx_j = row_index_j(n);
    PairQkv out;
    out.q = reshape(project_pairs(g.node_feats, edges_flat, idx_i, w.w_node_q[head],
                                  w.w_edge_q[head], w.b_q[head]),
                    {n, n, w.head_dim});
    out.k = reshape(project_pairs(g.node_feats, edges_flat, idx_j, w.w_node_k[head],
                                  w.w_edge_k[head], w.b_k[head]),
                    {n, n, w.head_dim});
    out.v = reshape(project_pairs(g.node_feats, edges_flat, idx_j, w.w_node_v[head],
                                  w.w_edge_v[head], w.b_v[head]),
                    {n, n, w.head_dim});
    return out;
}

PairQkv qkv_concat(const Graph& g, const AttentionWeights& w, std::size_t head) {
    check_head(w, head);
    check_widths(g, w);
    const std::size_t n = g.num_nodes;
    const std::size_t d_h = w.head_dim;
    TensorPtr edges_flat = reshape(g.edge_feats, {n * n, w.d_e});

    auto stacked = [&](const TensorPtr& wn, const TensorPtr& we) {
        std::vector<double> d((w.d_n + w.d_e) * d_h);
        std::copy(wn->data.begin(), wn->data.end(), d.begin());
        std::copy(we->data.begin(), we->data.end(), d.begin() + wn->data.size());
        return tensor({w.d_n + w.d_e, d_h}, std::move(d));
    };
    auto project = [&](const std::vector<std::size_t>& node_idx, const TensorPtr& wn,
                       const TensorPtr& we, const TensorPtr& bias) {
        TensorPtr cat =
            concat_last_axis({gather_rows(g.node_feats, node_idx), edges_flat});
        return reshape(add_bias(matmul(cat, stacked(wn, we)), bias), {n, n, d_h});
    };
    PairQkv out;
    out.q = project(row_index_i(n), w.w_node_q[head], w.w_edge_q[head], w.b_q[head]);
    out.k = project(row_index_j(n), w.w_node_k[head], w.w_edge_k[head], w.b_k[head]);
    out.v = project(row_index_j(n), w.w_node_v[head], w.w_edge_v[head], w.b_v[head]);
    return out;
}

TensorPtr attention_scores(const TensorPtr& q, const TensorPtr& k, const TensorPtr& mask) {
    if (q->shape.size() != 3 || q->shape[0] != q->shape[1]) {
        throw ShapeError("attention_scores: expects N×N×d_h, got " + shape_str(q->shape));
    }
    if (q->shape != k->shape) {
        throw ShapeError("attention_scores: q " + shape_str(q->shape) + " vs k " +
                         shape_str(k->shape));
    }
    const std::size_t n = q->shape[0];
    const std::size_t d_h = q->shape[2];
    TensorPtr dots = row_dot(reshape(q, {n * n, d_h}), reshape(k, {n * n, d_h}));
    TensorPtr scores = scale(reshape(dots, {n, n}), 1.0 / std::sqrt(static_cast<double>(d_h)));
    return softmax_rows(scores, mask);
}

DotExpansion dot_expand4(const std::vector<double>& n_i, const std::vector<double>& n_j,
                         const std::vector<double>& e_ij, const AttentionWeights& w,
                         std::size_t head) {
    check_head(w, head);
    const auto nq = matvec(*w.w_node_q[head], n_i);
    const auto eq = matvec(*w.w_edge_q[head], e_ij);
    const auto nk = matvec(*w.w_node_k[head], n_j);
    const auto ek = matvec(*w.w_edge_k[head], e_ij);
    DotExpansion out;
    out.terms[0] = dot(nq, nk);
    out.terms[1] = dot(nq, ek);
    out.terms[2] = dot(eq, nk);
    out.terms[3] = dot(eq, ek);
    out.total = out.terms[0] + out.terms[1] + out.terms[2] + out.terms[3];
    return out;
}

TensorPtr attend(const Graph& g, const AttentionWeights& w, const NodeUpdateWeights& nu,
                 const AttendOptions& opts) {
    check_widths(g, w);
    if (nu.d_n != w.d_n) {
        throw ShapeError("attend: node update width " + std::to_string(nu.d_n) +
                         " vs attention d_n " + std::to_string(w.d_n));
    }
    const std::size_t n = g.num_nodes;
    std::vector<TensorPtr> head_outputs;
    head_outputs.reserve(w.heads);
    for (std::size_t h = 0; h < w.heads; ++h) {
        PairQkv qkv = qkv_split(g, w, h);
        TensorPtr alpha =
            attention_scores(qkv.q, qkv.k, opts.mask ? *opts.mask : nullptr);
        if (opts.dropout_rate > 0.0) {
            alpha = dropout(alpha, opts.dropout_rate, *opts.rng);
        }
        head_outputs.push_back(
            pair_weighted_sum(alpha, reshape(qkv.v, {n * n, w.head_dim})));
    }
    TensorPtr mixed = w.heads == 1 ? head_outputs[0] : concat_last_axis(head_outputs);
    TensorPtr message = add_bias(matmul(mixed, w.w_out), w.b_out);
    // u = LN(m W1 + n); n' = LN(ReLU(u W2) W3 + u)
    TensorPtr u = layernorm(add(add_bias(matmul(message, nu.w1), nu.b1), g.node_feats),
                            nu.ln1_gain, nu.ln1_bias);
    TensorPtr hidden = relu(add_bias(matmul(u, nu.w2), nu.b2));
    if (opts.dropout_rate > 0.0) {
        hidden = dropout(hidden, opts.dropout_rate, *opts.rng);
    }
    return layernorm(add(add_bias(matmul(hidden, nu.w3), nu.b3), u), nu.ln2_gain, nu.ln2_bias);
}

}  // namespace rt
