#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "oracles.hpp"
#include "rt/error.hpp"
#include "rt/model.hpp"
#include "rt/tasks.hpp"

using namespace rt;

namespace {

ModelConfig small_rt_config() {
    ModelConfig mc;
    mc.kind = ModelKind::rt;
    mc.target = TargetKind::graph_scalar;
    mc.raw_node_width = 3;
    mc.raw_edge_width = 1;
    mc.num_layers = 2;
    mc.heads = 2;
    mc.head_dim = 4;
    mc.d_n = 8;
    mc.d_e = 6;
    mc.d_nh = 8;
    mc.d_eh1 = 6;
    mc.d_eh2 = 4;
    mc.ptr_dim = 4;
    return mc;
}

Graph random_raw(Rng& rng, std::size_t n, std::size_t d_n, std::size_t d_e,
                 std::size_t d_g = 0) {
    Graph g;
    g.num_nodes = n;
    g.node_feats = uniform_tensor({n, d_n}, rng, -1.0, 1.0);
    g.edge_feats = uniform_tensor({n, n, d_e}, rng, 0.0, 1.0);
    if (d_g > 0) {
        g.global_feat = uniform_tensor({d_g}, rng, -1.0, 1.0);
    }
    return g;
}

}  // namespace

TEST_CASE("forward: L=0 returns the encoded inputs unchanged") {
    ModelConfig mc = small_rt_config();
    mc.num_layers = 0;
    const Model m = init_model(mc, 7);
    Rng rng(301);
    const Graph g = random_raw(rng, 4, 3, 1);
    const ModelOutput out = forward(m, g);

    const TensorPtr nodes = add_bias(matmul(g.node_feats, m.enc_node_w), m.enc_node_b);
    const TensorPtr edges = add_bias(matmul(reshape(g.edge_feats, {16, 1}), m.enc_edge_w),
                                     m.enc_edge_b);
    CHECK(out.nodes->data == nodes->data);
    CHECK(out.edges->data == edges->data);
}

TEST_CASE("forward: deterministic across repeated runs") {
    const Model m = init_model(small_rt_config(), 9);
    Rng rng(302);
    const Graph g = random_raw(rng, 5, 3, 1);
    ModelConfig mc3 = small_rt_config();
    mc3.num_layers = 3;
    const Model m3 = init_model(mc3, 9);
    const ModelOutput a = forward(m3, g);
    const ModelOutput b = forward(m3, g);
    CHECK(a.nodes->data == b.nodes->data);
    CHECK(a.edges->data == b.edges->data);
}

TEST_CASE("apply_global: identity without a global vector") {
    Rng rng(303);
    const Graph g = random_raw(rng, 3, 2, 1);
    const Graph out = apply_global(g, GlobalMode::cat);
    CHECK(out.node_feats.get() == g.node_feats.get());
}

TEST_CASE("apply_global: cat broadcasts the global entry to every node") {
    Rng rng(304);
    const Graph g = random_raw(rng, 2, 3, 1, 1);
    const Graph out = apply_global(g, GlobalMode::cat);
    CHECK(out.node_width() == 4);
    CHECK(out.node_feats->data[3] == g.global_feat->data[0]);
    CHECK(out.node_feats->data[7] == g.global_feat->data[0]);
    CHECK_FALSE(out.global_feat);
}

TEST_CASE("apply_global: core appends an absent-encoded node and commutes with permutation") {
    Rng rng(305);
    const Graph g = random_raw(rng, 3, 3, 2, 2);
    const Graph out = apply_global(g, GlobalMode::core);
    REQUIRE(out.num_nodes == 4);
    CHECK(out.node_feats->data[3 * 3 + 0] == g.global_feat->data[0]);
    CHECK(out.node_feats->data[3 * 3 + 1] == g.global_feat->data[1]);
    CHECK(out.node_feats->data[3 * 3 + 2] == 0.0);
    for (std::size_t j = 0; j < 4; ++j) {
        for (std::size_t c = 0; c < 2; ++c) {
            CHECK(out.edge_feats->data[(3 * 4 + j) * 2 + c] == 0.0);
            CHECK(out.edge_feats->data[(j * 4 + 3) * 2 + c] == 0.0);
        }
    }

    // permuting the original nodes commutes with apply_global
    const std::vector<std::size_t> pi{2, 0, 1};
    std::vector<std::size_t> pi_ext{2, 0, 1, 3};
    const Graph lhs = apply_global(permute(g, pi), GlobalMode::core);
    const Graph rhs = permute(apply_global(g, GlobalMode::core), pi_ext);
    CHECK(lhs.node_feats->data == rhs.node_feats->data);
    CHECK(lhs.edge_feats->data == rhs.edge_feats->data);

    Graph too_wide = random_raw(rng, 3, 2, 1, 3);
    CHECK_THROWS_AS(apply_global(too_wide, GlobalMode::core), ValueError);
}

TEST_CASE("decode_pointers_from_edges: tie-break, N=1, brute-force oracle") {
    const TensorPtr zero_head_w = zeros({3, 1});
    const TensorPtr zero_head_b = zeros({1});
    Rng rng(306);
    const TensorPtr edges = uniform_tensor({4, 4, 3}, rng, -1.0, 1.0);
    const auto flat = decode_pointers_from_edges(edges, zero_head_w, zero_head_b);
    CHECK(flat == std::vector<std::uint32_t>{0, 0, 0, 0});

    const TensorPtr single = uniform_tensor({1, 1, 3}, rng, -1.0, 1.0);
    CHECK(decode_pointers_from_edges(single, zero_head_w, zero_head_b) ==
          std::vector<std::uint32_t>{0});

    const TensorPtr head_w = uniform_tensor({3, 1}, rng, -1.0, 1.0);
    const TensorPtr head_b = uniform_tensor({1}, rng, -1.0, 1.0);
    const auto ptrs = decode_pointers_from_edges(edges, head_w, head_b);
    for (std::size_t i = 0; i < 4; ++i) {
        double best = -1e300;
        std::uint32_t best_j = 0;
        for (std::size_t j = 0; j < 4; ++j) {
            double logit = head_b->data[0];
            for (std::size_t c = 0; c < 3; ++c) {
                logit += edges->data[(i * 4 + j) * 3 + c] * head_w->data[c];
            }
            if (logit > best) {
                best = logit;
                best_j = static_cast<std::uint32_t>(j);
            }
        }
        CHECK(ptrs[i] == best_j);
    }
}

TEST_CASE("decode_pointers_from_nodes: brute-force oracle and scale invariance") {
    Rng rng(307);
    const std::size_t n = 5, d_n = 4, d_p = 3;
    const TensorPtr nodes = uniform_tensor({n, d_n}, rng, -1.0, 1.0);
    const TensorPtr f_w = uniform_tensor({d_n, d_p}, rng, -1.0, 1.0);
    const TensorPtr f_b = uniform_tensor({d_p}, rng, -0.2, 0.2);
    const TensorPtr g_w = uniform_tensor({d_n, d_p}, rng, -1.0, 1.0);
    const TensorPtr g_b = uniform_tensor({d_p}, rng, -0.2, 0.2);
    const auto ptrs = decode_pointers_from_nodes(nodes, f_w, f_b, g_w, g_b);

    const TensorPtr logits = pair_logits(nodes, f_w, f_b, g_w, g_b);
    for (std::size_t i = 0; i < n; ++i) {
        double best = -1e300;
        std::uint32_t best_j = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (logits->data[i * n + j] > best) {
                best = logits->data[i * n + j];
                best_j = static_cast<std::uint32_t>(j);
            }
        }
        CHECK(ptrs[i] == best_j);
    }
    // scaling all logits by a positive constant leaves the argmax unchanged
    CHECK(argmax_rows(*scale(logits, 3.5)) == ptrs);
}

TEST_CASE("decode_graph_scalar: zero head, N=1 passthrough, loop oracle") {
    Rng rng(308);
    const TensorPtr nodes = uniform_tensor({4, 3}, rng, -1.0, 1.0);
    CHECK(decode_graph_scalar(nodes, zeros({3, 1}), zeros({1}))->scalar_value() == 0.0);

    const TensorPtr one = uniform_tensor({1, 3}, rng, -1.0, 1.0);
    const TensorPtr head_w = uniform_tensor({3, 1}, rng, -1.0, 1.0);
    const TensorPtr head_b = uniform_tensor({1}, rng, -1.0, 1.0);
    double expect = head_b->data[0];
    for (std::size_t c = 0; c < 3; ++c) {
        expect += one->data[c] * head_w->data[c];
    }
    CHECK(decode_graph_scalar(one, head_w, head_b)->scalar_value() ==
          doctest::Approx(expect).epsilon(1e-14));

    double pooled = head_b->data[0];
    for (std::size_t c = 0; c < 3; ++c) {
        double m = 0.0;
        for (std::size_t i = 0; i < 4; ++i) {
            m += nodes->data[i * 3 + c];
        }
        pooled += (m / 4.0) * head_w->data[c];
    }
    CHECK(decode_graph_scalar(nodes, head_w, head_b)->scalar_value() ==
          doctest::Approx(pooled).epsilon(1e-12));
}

TEST_CASE("whole-model permutation equivariance") {
    ModelConfig mc = small_rt_config();
    mc.num_layers = 3;
    const Model m = init_model(mc, 11);
    Rng rng(309);
    const Graph g = random_raw(rng, 6, 3, 1);
    const std::vector<std::size_t> pi{4, 2, 0, 5, 1, 3};
    const ModelOutput base = forward(m, g);
    const ModelOutput perm = forward(m, permute(g, pi));
    double worst = 0.0;
    for (std::size_t i = 0; i < 6; ++i) {
        for (std::size_t c = 0; c < mc.d_n; ++c) {
            worst = std::max(worst, std::abs(base.nodes->data[i * mc.d_n + c] -
                                             perm.nodes->data[pi[i] * mc.d_n + c]));
        }
        for (std::size_t j = 0; j < 6; ++j) {
            for (std::size_t c = 0; c < mc.d_e; ++c) {
                worst = std::max(worst,
                                 std::abs(base.edges->data[(i * 6 + j) * mc.d_e + c] -
                                          perm.edges->data[(pi[i] * 6 + pi[j]) * mc.d_e + c]));
            }
        }
    }
    CHECK(worst <= 1e-9);
}

TEST_CASE("checkpoint: round trip restores config and parameters") {
    ModelConfig mc = small_rt_config();
    mc.target = TargetKind::node_pointer;
    const Model m = init_model(mc, 21);
    const std::string path = "test_checkpoint.rtm";
    save_checkpoint(path, m);
    Model back = load_checkpoint(path);
    CHECK(back.cfg.kind == mc.kind);
    CHECK(back.cfg.num_layers == mc.num_layers);
    CHECK(back.cfg.d_e == mc.d_e);
    CHECK(checkpoint_bytes(back) == checkpoint_bytes(m));
    std::remove(path.c_str());
}

TEST_CASE("param accounting: analytic count matches the built model") {
    for (ModelKind kind :
         {ModelKind::rt, ModelKind::transformer, ModelKind::deepsets, ModelKind::mpnn}) {
        for (TargetKind target :
             {TargetKind::graph_scalar, TargetKind::node_pointer, TargetKind::edge_scalar}) {
            ModelConfig mc = small_rt_config();
            mc.kind = kind;
            mc.target = target;
            const Model m = init_model(mc, 3);
            CHECK(m.param_count() == param_count_for(mc));
        }
    }
}

TEST_CASE("match_param_budget: ablated configs reach the full model's budget") {
    ModelConfig mc = small_rt_config();
    ModelConfig ab = mc;
    ab.kind = ModelKind::transformer;
    ab.normalize();
    const ModelConfig matched = match_param_budget(ab, param_count_for(mc));
    CHECK(param_count_for(matched) >= param_count_for(mc));
    CHECK(matched.d_nh > ab.d_nh);
}

TEST_CASE("transformer model: no edge tensor, pair decoding works") {
    ModelConfig mc = small_rt_config();
    mc.kind = ModelKind::transformer;
    mc.target = TargetKind::edge_scalar;
    const Model m = init_model(mc, 13);
    CHECK(m.cfg.d_e == 0);
    Rng rng(310);
    const Graph g = random_raw(rng, 4, 3, 1);
    const ModelOutput out = forward(m, g);
    CHECK_FALSE(out.edges);
    const TensorPtr scores = predict_edge_scores(m, out);
    CHECK(scores->shape == Shape{4, 4});
}
