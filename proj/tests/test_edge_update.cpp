#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "rt/edge_update.hpp"
#include "rt/error.hpp"
#include "rt/graph.hpp"

using namespace rt;

TEST_CASE("edge_message: zero inputs and ReLU clamping") {
    Rng rng(201);
    const std::size_t d_n = 4, d_e = 3, d_eh1 = 5;
    EdgeUpdateWeights w(d_n, d_e, d_eh1, 2, rng);

    const TensorPtr z_e = zeros({d_e});
    const TensorPtr z_n = zeros({d_n});
    const TensorPtr msg = edge_message(z_e, z_e, z_n, z_n, w);
    CHECK(msg->data == std::vector<double>(d_eh1, 0.0));

    // force every pre-activation negative
    EdgeUpdateWeights wneg = w;
    wneg.w4 = full(w.w4->shape, -1.0, true);
    const TensorPtr ones_e = full({d_e}, 1.0);
    const TensorPtr ones_n = full({d_n}, 1.0);
    const TensorPtr clamped = edge_message(ones_e, ones_e, ones_n, ones_n, wneg);
    CHECK(clamped->data == std::vector<double>(d_eh1, 0.0));
}

TEST_CASE("edge_message: matches a scalar-loop reference") {
    Rng rng(202);
    const std::size_t d_n = 3, d_e = 2, d_eh1 = 4;
    EdgeUpdateWeights w(d_n, d_e, d_eh1, 2, rng);
    const TensorPtr e_ij = uniform_tensor({d_e}, rng, -1.0, 1.0);
    const TensorPtr e_ji = uniform_tensor({d_e}, rng, -1.0, 1.0);
    const TensorPtr n_i = uniform_tensor({d_n}, rng, -1.0, 1.0);
    const TensorPtr n_j = uniform_tensor({d_n}, rng, -1.0, 1.0);

    const TensorPtr msg = edge_message(e_ij, e_ji, n_i, n_j, w);
    std::vector<double> cat;
    cat.insert(cat.end(), e_ij->data.begin(), e_ij->data.end());
    cat.insert(cat.end(), e_ji->data.begin(), e_ji->data.end());
    cat.insert(cat.end(), n_i->data.begin(), n_i->data.end());
    cat.insert(cat.end(), n_j->data.begin(), n_j->data.end());
    for (std::size_t c = 0; c < d_eh1; ++c) {
        double s = w.b4->data[c];
        for (std::size_t r = 0; r < cat.size(); ++r) {
            s += cat[r] * w.w4->data[r * d_eh1 + c];
        }
        s = s > 0.0 ? s : 0.0;
        CHECK(std::abs(msg->data[c] - s) <= 1e-12);
    }
}

TEST_CASE("edge_update: symmetric edges with identical nodes stay symmetric") {
    Rng rng(203);
    const std::size_t n = 4, d_n = 3, d_e = 2;
    EdgeUpdateWeights w(d_n, d_e, 5, 3, rng);

    const TensorPtr one_node = uniform_tensor({1, d_n}, rng, -1.0, 1.0);
    std::vector<double> nodes;
    for (std::size_t i = 0; i < n; ++i) {
        nodes.insert(nodes.end(), one_node->data.begin(), one_node->data.end());
    }
    std::vector<double> edges(n * n * d_e);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            for (std::size_t c = 0; c < d_e; ++c) {
                const double v = rng.uniform(-1.0, 1.0);
                edges[(i * n + j) * d_e + c] = v;
                edges[(j * n + i) * d_e + c] = v;
            }
        }
    }
    const TensorPtr out =
        edge_update(tensor({n, n, d_e}, edges), tensor({n, d_n}, nodes), w);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t c = 0; c < d_e; ++c) {
                CHECK(out->data[(i * n + j) * d_e + c] ==
                      doctest::Approx(out->data[(j * n + i) * d_e + c]).epsilon(1e-14));
            }
        }
    }
}

TEST_CASE("edge_update: N=1 self-pair only") {
    Rng rng(204);
    EdgeUpdateWeights w(3, 2, 4, 2, rng);
    const TensorPtr edges = uniform_tensor({1, 1, 2}, rng, -1.0, 1.0);
    const TensorPtr nodes = uniform_tensor({1, 3}, rng, -1.0, 1.0);
    const TensorPtr out = edge_update(edges, nodes, w);
    CHECK(out->shape == Shape{1, 1, 2});

    // must equal the single-pair path (e_00, e_00, n_0, n_0)
    const TensorPtr e00 = tensor({2}, edges->data);
    const TensorPtr n0 = tensor({3}, nodes->data);
    const TensorPtr msg = edge_message(e00, e00, n0, n0, w);
    const TensorPtr u = layernorm(
        add(add_bias(matmul(reshape(msg, {1, 4}), w.w5), w.b5), reshape(e00, {1, 2})),
        w.ln1_gain, w.ln1_bias);
    const TensorPtr expect = layernorm(
        add(add_bias(matmul(relu(add_bias(matmul(u, w.w6), w.b6)), w.w7), w.b7), u),
        w.ln2_gain, w.ln2_bias);
    for (std::size_t c = 0; c < 2; ++c) {
        CHECK(out->data[c] == doctest::Approx(expect->data[c]).epsilon(1e-14));
    }
}

TEST_CASE("edge_update: pair-permutation equivariance") {
    Rng rng(205);
    const std::size_t n = 4, d_n = 3, d_e = 2;
    EdgeUpdateWeights w(d_n, d_e, 5, 3, rng);
    Graph g;
    g.num_nodes = n;
    g.node_feats = uniform_tensor({n, d_n}, rng, -1.0, 1.0);
    g.edge_feats = uniform_tensor({n, n, d_e}, rng, -1.0, 1.0);
    const std::vector<std::size_t> pi{2, 0, 3, 1};

    const TensorPtr base = edge_update(g.edge_feats, g.node_feats, w);
    const Graph pg = permute(g, pi);
    const TensorPtr permuted = edge_update(pg.edge_feats, pg.node_feats, w);
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t c = 0; c < d_e; ++c) {
                worst = std::max(
                    worst, std::abs(base->data[(i * n + j) * d_e + c] -
                                    permuted->data[(pi[i] * n + pi[j]) * d_e + c]));
            }
        }
    }
    CHECK(worst <= 1e-9);
}

TEST_CASE("edge_update: gradients match finite differences") {
    Rng rng(206);
    const std::size_t n = 3, d_n = 3, d_e = 2;
    EdgeUpdateWeights w(d_n, d_e, 4, 2, rng);
    const TensorPtr edges = uniform_tensor({n, n, d_e}, rng, -1.0, 1.0);
    const TensorPtr nodes = uniform_tensor({n, d_n}, rng, -1.0, 1.0);

    std::vector<TensorPtr> params;
    w.for_each_param([&params](TensorPtr& t) { params.push_back(t); });
    auto loss = [&] { return sum(edge_update(edges, nodes, w)); };
    CHECK(oracle::max_grad_rel_err(params, loss) < 1e-4);
}

TEST_CASE("edge_update: width mismatches are rejected") {
    Rng rng(207);
    EdgeUpdateWeights w(3, 2, 4, 2, rng);
    CHECK_THROWS_AS(edge_update(zeros({3, 3, 5}), zeros({3, 3}), w), ShapeError);
    CHECK_THROWS_AS(edge_update(zeros({3, 3, 2}), zeros({3, 5}), w), ShapeError);
}
