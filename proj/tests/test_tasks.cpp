#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "rt/error.hpp"
#include "rt/tasks.hpp"

using namespace rt;

TEST_CASE("gen_lobster: the [4,5) family is a 4-node path with diameter 3") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const TaskExample ex = gen_lobster({4, 5, 0.5, 0.5, seed});
        REQUIRE(ex.input.num_nodes == 4);
        const TreeGraph t = tree_from_graph(ex.input);
        CHECK(t.edges.size() == 3);
        // a 4-node tree with max degree 2 is a path
        for (const auto& adj : t.adj) {
            CHECK(adj.size() <= 2);
        }
        // endpoints are at hop distance 3
        std::size_t endpoint = 0;
        while (t.adj[endpoint].size() != 1) {
            ++endpoint;
        }
        const BfsResult bfs = bfs_oracle(ex.input, endpoint);
        CHECK(*std::max_element(bfs.dist.begin(), bfs.dist.end()) == 3);
    }
}

TEST_CASE("gen_lobster: exactly one source and one destination flag") {
    for (std::uint64_t seed = 1; seed <= 30; ++seed) {
        const TaskExample ex = gen_lobster({4, 16, 0.5, 0.5, seed});
        const std::size_t n = ex.input.num_nodes;
        std::size_t sources = 0, dests = 0;
        for (std::size_t i = 0; i < n; ++i) {
            sources += ex.input.node_feats->data[i * 3 + 0] == 1.0 ? 1 : 0;
            dests += ex.input.node_feats->data[i * 3 + 1] == 1.0 ? 1 : 0;
            double row = 0.0;
            for (std::size_t c = 0; c < 3; ++c) {
                row += ex.input.node_feats->data[i * 3 + c];
            }
            CHECK(row == 1.0);  // one-hot
        }
        CHECK(sources == 1);
        CHECK(dests == 1);
        CHECK(ex.scalar_target >= 1.0);
    }
}

TEST_CASE("gen_lobster: corpus is trees that double-peel to paths") {
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        const TaskExample ex = gen_lobster({4, 20, 0.5, 0.5, seed});
        const TreeGraph t = tree_from_graph(ex.input);
        const std::size_t n = ex.input.num_nodes;
        REQUIRE(t.edges.size() == n - 1);
        const BfsResult bfs = bfs_oracle(ex.input, 0);
        for (const int d : bfs.dist) {
            CHECK(d >= 0);  // connected
        }
        CHECK(double_leaf_removal_yields_path(t));
    }
}

TEST_CASE("gen_lobster: reproducible bit-exactly from its spec and seed") {
    const LobsterSpec spec{4, 16, 0.5, 0.5, 99};
    const TaskExample a = gen_lobster(spec);
    const TaskExample b = gen_lobster(spec);
    CHECK(a.input.node_feats->data == b.input.node_feats->data);
    CHECK(a.input.edge_feats->data == b.input.edge_feats->data);
    CHECK(a.scalar_target == b.scalar_target);
}

TEST_CASE("gen_lobster: infeasible ranges are rejected") {
    CHECK_THROWS_AS(gen_lobster({4, 4, 0.5, 0.5, 1}), GeneratorError);
    CHECK_THROWS_AS(gen_lobster({1, 4, 0.5, 0.5, 1}), GeneratorError);
    CHECK_THROWS_AS(gen_lobster({4, 16, 1.5, 0.5, 1}), GeneratorError);
}

TEST_CASE("bfs_oracle: single node, 2-node edge, Floyd-Warshall cross-check") {
    Graph single = make_graph(1, 1, 1);
    const BfsResult r1 = bfs_oracle(single, 0);
    CHECK(r1.dist == std::vector<int>{0});
    CHECK(r1.parent == std::vector<int>{0});

    Graph pair = make_graph(2, 1, 1);
    pair.edge_feats->data[0 * 2 + 1] = 1.0;
    pair.edge_feats->data[1 * 2 + 0] = 1.0;
    const BfsResult r2 = bfs_oracle(pair, 0);
    CHECK(r2.dist == std::vector<int>{0, 1});
    CHECK(r2.parent == std::vector<int>{0, 0});

    for (std::uint64_t seed = 1; seed <= 25; ++seed) {
        const TaskExample ex = gen_lobster({4, 14, 0.5, 0.5, seed});
        const TreeGraph t = tree_from_graph(ex.input);
        const std::size_t n = ex.input.num_nodes;
        const auto fw = oracle::floyd_warshall_hops(n, t.edges);
        for (std::size_t s = 0; s < n; ++s) {
            const BfsResult bfs = bfs_oracle(ex.input, s);
            for (std::size_t v = 0; v < n; ++v) {
                CHECK(bfs.dist[v] == fw[s * n + v]);
            }
        }
    }
}

TEST_CASE("gen_bfs_pointers: parents validated against the oracle") {
    for (std::uint64_t seed = 1; seed <= 40; ++seed) {
        const TaskExample ex = gen_bfs_pointers({4, 16, 0.5, 0.5, seed});
        const std::size_t n = ex.input.num_nodes;
        std::size_t source = n;
        for (std::size_t i = 0; i < n; ++i) {
            if (ex.input.node_feats->data[i * 3] == 1.0) {
                source = i;
            }
        }
        REQUIRE(source < n);
        CHECK(ex.pointer_target[source] == source);  // source points at itself
        const BfsResult bfs = bfs_oracle(ex.input, source);
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(ex.pointer_target[i] == static_cast<std::uint32_t>(bfs.parent[i]));
        }
    }
}

TEST_CASE("gen_bfs_pointers: path graph parents form a chain") {
    // [4,5) draws are always 4-paths; with the source at an endpoint the
    // parents walk back along it
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        const TaskExample ex = gen_bfs_pointers({4, 5, 0.5, 0.5, seed});
        const TreeGraph t = tree_from_graph(ex.input);
        std::size_t source = 0;
        for (std::size_t i = 0; i < 4; ++i) {
            if (ex.input.node_feats->data[i * 3] == 1.0) {
                source = i;
            }
        }
        if (t.adj[source].size() != 1) {
            continue;
        }
        // walk the chain from the far endpoint back to the source
        std::size_t far = 0;
        const BfsResult bfs = bfs_oracle(ex.input, source);
        for (std::size_t i = 0; i < 4; ++i) {
            if (bfs.dist[i] == 3) {
                far = i;
            }
        }
        std::size_t cur = far, hops = 0;
        while (cur != source && hops < 4) {
            cur = ex.pointer_target[cur];
            ++hops;
        }
        CHECK(cur == source);
        CHECK(hops == 3);
    }
}

TEST_CASE("gen_fw_step: trivial cases and the min-plus brute force") {
    const TaskExample one = gen_fw_step(1, 5);
    CHECK(one.edge_target->data == std::vector<double>{0.0});

    // all-zero weights -> all-zero relaxation
    TaskExample zeroed = gen_fw_step(3, 5);
    std::vector<double> w(9, 0.0);
    const auto target = oracle::min_plus_square(w, 3);
    CHECK(target == std::vector<double>(9, 0.0));

    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const TaskExample ex = gen_fw_step(5, seed);
        std::vector<double> weights(25);
        for (std::size_t i = 0; i < 25; ++i) {
            weights[i] = ex.input.edge_feats->data[i];
        }
        const auto expect = oracle::min_plus_square(weights, 5);
        for (std::size_t i = 0; i < 25; ++i) {
            CHECK(ex.edge_target->data[i] == expect[i]);
            // taking k = j with w_jj = 0 bounds the target by w_ij
            CHECK(ex.edge_target->data[i] <= weights[i]);
        }
        for (std::size_t i = 0; i < 5; ++i) {
            CHECK(ex.input.edge_feats->data[(i * 5 + i)] == 0.0);
            CHECK(ex.input.node_feats->data[i] == 1.0);
        }
    }
}

TEST_CASE("relative_loss: identity, arithmetic, domain error") {
    CHECK(relative_loss(4.0, 4.0) == 0.0);
    CHECK(relative_loss(4.0, 5.0) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK_THROWS_AS(relative_loss(0.0, 1.0), ValueError);
}

TEST_CASE("pointer_score: accuracy arithmetic") {
    CHECK(pointer_score({1, 2, 3}, {1, 2, 3}) == 1.0);
    CHECK(pointer_score({0, 0, 0}, {1, 2, 3}) == 0.0);
    CHECK(pointer_score({1, 2, 0, 0}, {1, 2, 3, 3}) == 0.5);
}
