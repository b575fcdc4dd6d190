#include "rt/edge_update.hpp"

#include "rt/error.hpp"

namespace rt {

EdgeUpdateWeights::EdgeUpdateWeights(std::size_t d_n_, std::size_t d_e_, std::size_t d_eh1_,
                                     std::size_t d_eh2_, Rng& rng)
    : d_n(d_n_), d_e(d_e_), d_eh1(d_eh1_), d_eh2(d_eh2_) {
    w4 = glorot_tensor(2 * d_e + 2 * d_n, d_eh1, rng);
    b4 = zeros({d_eh1}, true);
    w5 = glorot_tensor(d_eh1, d_e, rng);
    b5 = zeros({d_e}, true);
    w6 = glorot_tensor(d_e, d_eh2, rng);
    b6 = zeros({d_eh2}, true);
    w7 = glorot_tensor(d_eh2, d_e, rng);
    b7 = zeros({d_e}, true);
    ln1_gain = full({d_e}, 1.0, true);
    ln1_bias = zeros({d_e}, true);
    ln2_gain = full({d_e}, 1.0, true);
    ln2_bias = zeros({d_e}, true);
}

void EdgeUpdateWeights::for_each_param(const std::function<void(TensorPtr&)>& fn) {
    fn(w4);
    fn(b4);
    fn(w5);
    fn(b5);
    fn(w6);
    fn(b6);
    fn(w7);
    fn(b7);
    fn(ln1_gain);
    fn(ln1_bias);
    fn(ln2_gain);
    fn(ln2_bias);
}

namespace {

// message + residual/LayerNorm stack over a flat batch of pair rows
TensorPtr update_rows(const TensorPtr& e_rows, const TensorPtr& locale,
                      const EdgeUpdateWeights& w) {
    TensorPtr msg = relu(add_bias(matmul(locale, w.w4), w.b4));
    TensorPtr u = layernorm(add(add_bias(matmul(msg, w.w5), w.b5), e_rows), w.ln1_gain,
                            w.ln1_bias);
    TensorPtr hidden = relu(add_bias(matmul(u, w.w6), w.b6));
    return layernorm(add(add_bias(matmul(hidden, w.w7), w.b7), u), w.ln2_gain, w.ln2_bias);
}

}  // namespace

TensorPtr edge_message(const TensorPtr& e_ij, const TensorPtr& e_ji, const TensorPtr& n_i,
                       const TensorPtr& n_j, const EdgeUpdateWeights& w) {
    if (e_ij->shape != Shape{w.d_e} || e_ji->shape != Shape{w.d_e} ||
        n_i->shape != Shape{w.d_n} || n_j->shape != Shape{w.d_n}) {
        throw ShapeError("edge_message: locale widths do not match weights (d_e=" +
                         std::to_string(w.d_e) + ", d_n=" + std::to_string(w.d_n) + ")");
    }
    TensorPtr locale = reshape(concat_last_axis({e_ij, e_ji, n_i, n_j}),
                               {1, 2 * w.d_e + 2 * w.d_n});
    return reshape(relu(add_bias(matmul(locale, w.w4), w.b4)), {w.d_eh1});
}

TensorPtr edge_update(const TensorPtr& edges, const TensorPtr& nodes_updated,
                      const EdgeUpdateWeights& w) {
    if (edges->shape.size() != 3 || edges->shape[0] != edges->shape[1] ||
        edges->shape[2] != w.d_e) {
        throw ShapeError("edge_update: edges must be N×N×" + std::to_string(w.d_e) + ", got " +
                         shape_str(edges->shape));
    }
    const std::size_t n = edges->shape[0];
    if (nodes_updated->shape != Shape{n, w.d_n}) {
        throw ShapeError("edge_update: nodes must be [" + std::to_string(n) + "x" +
                         std::to_string(w.d_n) + "], got " + shape_str(nodes_updated->shape));
    }
    TensorPtr e_flat = reshape(edges, {n * n, w.d_e});
    std::vector<std::size_t> swap_idx(n * n), idx_i(n * n), idx_j(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            swap_idx[i * n + j] = j * n + i;
            idx_i[i * n + j] = i;
            idx_j[i * n + j] = j;
        }
    }
    TensorPtr locale = concat_last_axis({e_flat, gather_rows(e_flat, swap_idx),
                                         gather_rows(nodes_updated, idx_i),
                                         gather_rows(nodes_updated, idx_j)});
    return reshape(update_rows(e_flat, locale, w), {n, n, w.d_e});
}

}  // namespace rt
