#include <doctest.h>

#include <cmath>
#include <cstring>

#include "oracles.hpp"
#include "rt/attention.hpp"
#include "rt/baselines.hpp"
#include "rt/error.hpp"

using namespace rt;

namespace {

Graph random_graph(Rng& rng, std::size_t n, std::size_t d_n, std::size_t d_e) {
    Graph g;
    g.num_nodes = n;
    g.node_feats = uniform_tensor({n, d_n}, rng, -1.0, 1.0);
    g.edge_feats = uniform_tensor({n, n, d_e}, rng, -1.0, 1.0);
    return g;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        m = std::max(m, std::abs(a.data[i] - b.data[i]));
    }
    return m;
}

void zero_edge_weights(AttentionWeights& w) {
    for (std::size_t h = 0; h < w.heads; ++h) {
        w.w_edge_q[h] = zeros(w.w_edge_q[h]->shape, true);
        w.w_edge_k[h] = zeros(w.w_edge_k[h]->shape, true);
        w.w_edge_v[h] = zeros(w.w_edge_v[h]->shape, true);
    }
}

}  // namespace

TEST_CASE("qkv_split: zero edge path reduces to standard per-node QKV") {
    Rng rng(101);
    const std::size_t n = 4, d_n = 5, d_e = 3, d_h = 4;
    AttentionWeights w(d_n, d_e, 1, d_h, rng);
    zero_edge_weights(w);
    Graph g = random_graph(rng, n, d_n, d_e);
    g.edge_feats = zeros({n, n, d_e});

    const PairQkv qkv = qkv_split(g, w, 0);
    const TensorPtr qn = matmul(g.node_feats, w.w_node_q[0]);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t c = 0; c < d_h; ++c) {
                // q_ij constant in j, equals n_i W_n^Q
                CHECK(qkv.q->data[(i * n + j) * d_h + c] == qn->data[i * d_h + c]);
            }
        }
    }
}

TEST_CASE("qkv_split: N=1 yields the single self-pair triple") {
    Rng rng(102);
    AttentionWeights w(3, 2, 1, 4, rng);
    const Graph g = random_graph(rng, 1, 3, 2);
    const PairQkv qkv = qkv_split(g, w, 0);
    CHECK(qkv.q->shape == Shape{1, 1, 4});
    CHECK(qkv.k->shape == Shape{1, 1, 4});
    CHECK(qkv.v->shape == Shape{1, 1, 4});
}

TEST_CASE("qkv forms: split equals concat on random instances") {
    Rng rng(103);
    for (int t = 0; t < 20; ++t) {
        const std::size_t n = 2 + rng.below(5);
        const std::size_t d_n = 1 + rng.below(6);
        const std::size_t d_e = 1 + rng.below(6);
        const std::size_t d_h = 1 + rng.below(5);
        AttentionWeights w(d_n, d_e, 2, d_h, rng);
        const Graph g = random_graph(rng, n, d_n, d_e);
        for (std::size_t h = 0; h < 2; ++h) {
            const PairQkv a = qkv_split(g, w, h);
            const PairQkv b = qkv_concat(g, w, h);
            CHECK(max_abs_diff(*a.q, *b.q) <= 1e-12);
            CHECK(max_abs_diff(*a.k, *b.k) <= 1e-12);
            CHECK(max_abs_diff(*a.v, *b.v) <= 1e-12);
        }
    }
}

TEST_CASE("qkv_concat: zero edge width is the standard projection") {
    Rng rng(104);
    const std::size_t n = 3, d_n = 4, d_h = 3;
    AttentionWeights w(d_n, 0, 1, d_h, rng);
    Graph g = random_graph(rng, n, d_n, 0);
    const PairQkv cat = qkv_concat(g, w, 0);
    const PairQkv split = qkv_split(g, w, 0);
    CHECK(max_abs_diff(*cat.q, *split.q) == 0.0);
    CHECK(max_abs_diff(*cat.k, *split.k) == 0.0);
}

TEST_CASE("attention_scores: uniform rows for zero inputs, N=1, row sums") {
    const TensorPtr zq = zeros({3, 3, 4});
    const TensorPtr alpha = attention_scores(zq, zq);
    for (const double v : alpha->data) {
        CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-15));
    }

    const TensorPtr one = zeros({1, 1, 2});
    CHECK(attention_scores(one, one)->data == std::vector<double>{1.0});

    Rng rng(105);
    const TensorPtr q = uniform_tensor({4, 4, 3}, rng, -2.0, 2.0);
    const TensorPtr k = uniform_tensor({4, 4, 3}, rng, -2.0, 2.0);
    const TensorPtr a = attention_scores(q, k);
    for (std::size_t i = 0; i < 4; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < 4; ++j) {
            s += a->data[i * 4 + j];
        }
        CHECK(std::abs(s - 1.0) <= 1e-12);
    }
}

TEST_CASE("dot_expand4: degenerate and identity cases") {
    Rng rng(106);
    const std::size_t d_n = 4, d_e = 3, d_h = 5;
    AttentionWeights w(d_n, d_e, 1, d_h, rng);

    std::vector<double> n_i(d_n), n_j(d_n), e_ij(d_e, 0.0);
    for (double& v : n_i) {
        v = rng.uniform(-1.0, 1.0);
    }
    for (double& v : n_j) {
        v = rng.uniform(-1.0, 1.0);
    }
    const DotExpansion zero_edge = dot_expand4(n_i, n_j, e_ij, w, 0);
    CHECK(zero_edge.terms[1] == 0.0);
    CHECK(zero_edge.terms[2] == 0.0);
    CHECK(zero_edge.terms[3] == 0.0);
    CHECK(zero_edge.total == zero_edge.terms[0]);

    for (double& v : e_ij) {
        v = rng.uniform(-1.0, 1.0);
    }
    const DotExpansion zero_nodes =
        dot_expand4(std::vector<double>(d_n, 0.0), std::vector<double>(d_n, 0.0), e_ij, w, 0);
    CHECK(zero_nodes.terms[0] == 0.0);
    CHECK(zero_nodes.total == zero_nodes.terms[3]);

    // distributivity identity against the projected dot product
    Graph g;
    g.num_nodes = 2;
    std::vector<double> nodes = n_i;
    nodes.insert(nodes.end(), n_j.begin(), n_j.end());
    g.node_feats = tensor({2, d_n}, nodes);
    g.edge_feats = zeros({2, 2, d_e});
    for (std::size_t c = 0; c < d_e; ++c) {
        g.edge_feats->data[(0 * 2 + 1) * d_e + c] = e_ij[c];
    }
    const PairQkv qkv = qkv_split(g, w, 0);
    double qk = 0.0;
    for (std::size_t c = 0; c < d_h; ++c) {
        qk += qkv.q->data[1 * d_h + c] * qkv.k->data[1 * d_h + c];
    }
    const DotExpansion full = dot_expand4(n_i, n_j, e_ij, w, 0);
    CHECK(std::abs(full.total - qk) <= 1e-12);
}

TEST_CASE("attend: single head with zero edges equals vanilla layer bitwise") {
    Rng rng(107);
    const std::size_t n = 5, d_n = 6;
    AttentionWeights w(d_n, 0, 1, d_n, rng);
    NodeUpdateWeights nu(d_n, 8, rng);
    Graph g;
    g.num_nodes = n;
    g.node_feats = uniform_tensor({n, d_n}, rng, -1.0, 1.0);
    g.edge_feats = zeros({n, n, 0});

    const TensorPtr a = attend(g, w, nu);
    const TensorPtr b = vanilla_transformer_layer(g, w, nu);
    CHECK(std::memcmp(a->data.data(), b->data.data(), a->size() * sizeof(double)) == 0);
}

TEST_CASE("attend: N=1 runs the identity-mixing path") {
    Rng rng(108);
    AttentionWeights w(4, 2, 2, 3, rng);
    NodeUpdateWeights nu(4, 5, rng);
    const Graph g = random_graph(rng, 1, 4, 2);
    const TensorPtr out = attend(g, w, nu);
    CHECK(out->shape == Shape{1, 4});
    for (const double v : out->data) {
        CHECK(std::isfinite(v));
    }
}

TEST_CASE("attend: permutation equivariance of a single layer") {
    Rng rng(109);
    const std::size_t n = 5, d_n = 6, d_e = 4;
    AttentionWeights w(d_n, d_e, 2, 4, rng);
    NodeUpdateWeights nu(d_n, 8, rng);
    const Graph g = random_graph(rng, n, d_n, d_e);
    std::vector<std::size_t> pi{3, 1, 4, 0, 2};

    const TensorPtr base = attend(g, w, nu);
    const TensorPtr permuted = attend(permute(g, pi), w, nu);
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < d_n; ++c) {
            worst = std::max(worst, std::abs(base->data[i * d_n + c] -
                                             permuted->data[pi[i] * d_n + c]));
        }
    }
    CHECK(worst <= 1e-9);
}

TEST_CASE("attend: gradients flow to every attention parameter") {
    Rng rng(110);
    const std::size_t n = 3, d_n = 4, d_e = 3;
    AttentionWeights w(d_n, d_e, 2, 3, rng);
    NodeUpdateWeights nu(d_n, 5, rng);
    const Graph g = random_graph(rng, n, d_n, d_e);

    std::vector<TensorPtr> params;
    auto collect = [&params](TensorPtr& t) { params.push_back(t); };
    w.for_each_param(collect);
    nu.for_each_param(collect);
    auto loss = [&] { return sum(attend(g, w, nu)); };
    CHECK(oracle::max_grad_rel_err(params, loss) < 1e-4);
}

TEST_CASE("attend: width mismatch raises a shape error") {
    Rng rng(111);
    AttentionWeights w(4, 2, 1, 3, rng);
    NodeUpdateWeights nu(4, 5, rng);
    const Graph g = random_graph(rng, 3, 5, 2);
    CHECK_THROWS_AS(attend(g, w, nu), ShapeError);
}
