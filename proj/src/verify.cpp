#include "rt/verify.hpp"

#include <cmath>
#include <cstring>

#include "rt/attention.hpp"
#include "rt/baselines.hpp"
#include "rt/edge_update.hpp"
#include "rt/model.hpp"
#include "rt/train.hpp"

namespace rt {

namespace {

Graph random_graph(Rng& rng, std::size_t n, std::size_t d_n, std::size_t d_e, double lo = -1.0,
                   double hi = 1.0) {
    Graph g;
    g.num_nodes = n;
    g.node_feats = uniform_tensor({n, d_n}, rng, lo, hi);
    g.edge_feats = uniform_tensor({n, n, d_e}, rng, lo, hi);
    return g;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        m = std::max(m, std::abs(a.data[i] - b.data[i]));
    }
    return m;
}

std::vector<std::size_t> random_permutation(Rng& rng, std::size_t n) {
    std::vector<std::size_t> pi(n);
    for (std::size_t i = 0; i < n; ++i) {
        pi[i] = i;
    }
    rng.shuffle(pi);
    return pi;
}

}  // namespace

CheckResult check_form_equivalence(std::uint64_t seed, std::size_t trials) {
    Rng rng(derive_seed(seed, 1));
    double worst = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
        const std::size_t n = 2 + rng.below(9);        // [2,10]
        const std::size_t d_n = 1 + rng.below(12);
        const std::size_t d_e = t % 7 == 0 ? 0 : 1 + rng.below(12);
        const std::size_t heads = 1 + rng.below(3);
        const std::size_t d_h = 1 + rng.below(8);
        AttentionWeights w(d_n, d_e, heads, d_h, rng);
        const Graph g = random_graph(rng, n, d_n, d_e);
        for (std::size_t h = 0; h < heads; ++h) {
            const PairQkv split = qkv_split(g, w, h);
            const PairQkv cat = qkv_concat(g, w, h);
            worst = std::max(worst, max_abs_diff(*split.q, *cat.q));
            worst = std::max(worst, max_abs_diff(*split.k, *cat.k));
            worst = std::max(worst, max_abs_diff(*split.v, *cat.v));
        }
    }
    return {"form_equivalence", worst <= 1e-12, worst,
            std::to_string(trials) + " random graphs"};
}

CheckResult check_expansion_identity(std::uint64_t seed, std::size_t trials) {
    Rng rng(derive_seed(seed, 2));
    double worst = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
        const std::size_t d_n = 1 + rng.below(10);
        const std::size_t d_e = 1 + rng.below(10);
        const std::size_t d_h = 1 + rng.below(8);
        AttentionWeights w(d_n, d_e, 1, d_h, rng);
        // a two-node graph holding (n_i, n_j, e_ij) at the (0,1) pair
        Graph g = random_graph(rng, 2, d_n, d_e);
        std::vector<double> n_i(g.node_feats->data.begin(), g.node_feats->data.begin() + d_n);
        std::vector<double> n_j(g.node_feats->data.begin() + d_n,
                                g.node_feats->data.begin() + 2 * d_n);
        const std::size_t pair = 0 * 2 + 1;
        std::vector<double> e_ij(g.edge_feats->data.begin() + pair * d_e,
                                 g.edge_feats->data.begin() + (pair + 1) * d_e);

        const PairQkv qkv = qkv_split(g, w, 0);
        double qk = 0.0;
        for (std::size_t c = 0; c < d_h; ++c) {
            qk += qkv.q->data[pair * d_h + c] * qkv.k->data[pair * d_h + c];
        }
        const DotExpansion ex = dot_expand4(n_i, n_j, e_ij, w, 0);
        worst = std::max(worst, std::abs(ex.total - qk));
    }
    return {"expansion_identity", worst <= 1e-12, worst, std::to_string(trials) + " draws"};
}

CheckResult check_degenerate_reduction(std::uint64_t seed, std::size_t trials) {
    Rng rng(derive_seed(seed, 3));
    bool pass = true;
    double worst = 0.0;
    for (std::size_t t = 0; t < trials && pass; ++t) {
        const std::size_t n = 2 + rng.below(7);
        const std::size_t d_n = 2 + rng.below(8);
        const std::size_t d_h = 1 + rng.below(6);
        const std::size_t heads = 1 + rng.below(2);
        AttentionWeights w(d_n, 0, heads, d_h, rng);
        NodeUpdateWeights nu(d_n, 1 + rng.below(8), rng);
        Graph g;
        g.num_nodes = n;
        g.node_feats = uniform_tensor({n, d_n}, rng, -1.0, 1.0);
        g.edge_feats = zeros({n, n, 0});

        const TensorPtr rt_out = attend(g, w, nu);
        const TensorPtr vanilla = vanilla_transformer_layer(g, w, nu);
        if (std::memcmp(rt_out->data.data(), vanilla->data.data(),
                        rt_out->size() * sizeof(double)) != 0) {
            pass = false;
            worst = max_abs_diff(*rt_out, *vanilla);
        }

        // zeroed edge path with d_e > 0 must also collapse to it exactly
        AttentionWeights wz = w;
        wz.d_e = 3;
        for (std::size_t h = 0; h < heads; ++h) {
            wz.w_edge_q[h] = zeros({3, d_h}, true);
            wz.w_edge_k[h] = zeros({3, d_h}, true);
            wz.w_edge_v[h] = zeros({3, d_h}, true);
        }
        Graph gz = g;
        gz.edge_feats = zeros({n, n, 3});
        const TensorPtr zero_edge = attend(gz, wz, nu);
        const double diff = max_abs_diff(*zero_edge, *vanilla);
        worst = std::max(worst, diff);
        pass = pass && diff == 0.0;
    }
    return {"degenerate_reduction", pass, worst, std::to_string(trials) + " node sets, bitwise"};
}

CheckResult check_forward_equivariance(std::uint64_t seed, std::size_t trials,
                                       std::size_t layers) {
    Rng rng(derive_seed(seed, 4));
    double worst = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
        const std::size_t n = 2 + rng.below(7);
        ModelConfig mc;
        mc.kind = ModelKind::rt;
        mc.target = TargetKind::graph_scalar;
        mc.raw_node_width = 3;
        mc.raw_edge_width = 2;
        mc.num_layers = layers;
        mc.heads = 2;
        mc.head_dim = 4;
        mc.d_n = 8;
        mc.d_e = 6;
        mc.d_nh = 8;
        mc.d_eh1 = 6;
        mc.d_eh2 = 4;
        const Model m = init_model(mc, rng.next_u64());
        Graph g = random_graph(rng, n, mc.raw_node_width, mc.raw_edge_width);
        const std::vector<std::size_t> pi = random_permutation(rng, n);

        const ModelOutput base = forward(m, g);
        const ModelOutput perm = forward(m, permute(g, pi));

        // permute the base outputs and compare
        const std::size_t d_n = mc.d_n, d_e = mc.d_e;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t c = 0; c < d_n; ++c) {
                worst = std::max(worst, std::abs(base.nodes->data[i * d_n + c] -
                                                 perm.nodes->data[pi[i] * d_n + c]));
            }
            for (std::size_t j = 0; j < n; ++j) {
                for (std::size_t c = 0; c < d_e; ++c) {
                    worst = std::max(
                        worst, std::abs(base.edges->data[(i * n + j) * d_e + c] -
                                        perm.edges->data[(pi[i] * n + pi[j]) * d_e + c]));
                }
            }
        }
    }
    return {"forward_equivariance", worst <= 1e-9, worst,
            std::to_string(trials) + " graphs, " + std::to_string(layers) + " layers"};
}

CheckResult check_gradient_full_layer(std::uint64_t seed) {
    Rng rng(derive_seed(seed, 5));
    const std::size_t n = 5, d_n = 8, d_e = 4;
    AttentionWeights attn(d_n, d_e, 2, 4, rng);
    NodeUpdateWeights node(d_n, 6, rng);
    EdgeUpdateWeights edge(d_n, d_e, 6, 3, rng);
    // perturb rank-1 params (biases away from 0, LayerNorm gains around 1)
    // so their gradients are exercised away from init
    auto jitter = [&rng](TensorPtr& t) {
        if (t->shape.size() == 1) {
            for (double& v : t->data) {
                v += rng.uniform(-0.05, 0.05);
            }
        }
    };
    attn.for_each_param(jitter);
    node.for_each_param(jitter);
    edge.for_each_param(jitter);

    const Graph g = random_graph(rng, n, d_n, d_e);
    auto loss_of = [&]() {
        const TensorPtr nodes = attend(g, attn, node);
        const TensorPtr edges = edge_update(g.edge_feats, nodes, edge);
        return add(sum(nodes), sum(edges));
    };

    std::vector<TensorPtr> params;
    auto collect = [&params](TensorPtr& t) { params.push_back(t); };
    attn.for_each_param(collect);
    node.for_each_param(collect);
    edge.for_each_param(collect);
    for (const TensorPtr& p : params) {
        p->ensure_grad();
        p->zero_grad();
    }
    backward(loss_of());

    // Denominator floored at 1e-2: central differences at h=1e-5 carry ~1e-7
    // of truncation error, so entries below the floor are held to the same
    // absolute precision (1e-6) instead of a vacuous relative one.
    const double h = 1e-5;
    double worst = 0.0;
    for (const TensorPtr& p : params) {
        for (std::size_t i = 0; i < p->size(); ++i) {
            const double keep = p->data[i];
            p->data[i] = keep + h;
            const double up = loss_of()->scalar_value();
            p->data[i] = keep - h;
            const double down = loss_of()->scalar_value();
            p->data[i] = keep;
            const double fd = (up - down) / (2.0 * h);
            const double an = p->grad[i];
            const double rel = std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-2});
            worst = std::max(worst, rel);
        }
    }
    return {"gradient_full_layer", worst < 1e-4, worst,
            std::to_string(params.size()) + " parameter tensors, h=1e-5, rel floor 1e-2"};
}

CheckResult check_softmax_normalization(std::uint64_t seed, std::size_t trials) {
    Rng rng(derive_seed(seed, 6));
    double worst = 0.0;
    bool masked_zero = true;
    for (std::size_t t = 0; t < trials; ++t) {
        const std::size_t rows = 1 + rng.below(8);
        const std::size_t cols = 1 + rng.below(10);
        const TensorPtr x = uniform_tensor({rows, cols}, rng, -30.0, 30.0);
        TensorPtr mask;
        if (t % 2 == 1) {
            mask = zeros({rows, cols});
            for (std::size_t r = 0; r < rows; ++r) {
                // keep at least one entry per row
                mask->data[r * cols + rng.below(cols)] = 1.0;
                for (std::size_t c = 0; c < cols; ++c) {
                    if (rng.bernoulli(0.5)) {
                        mask->data[r * cols + c] = 1.0;
                    }
                }
            }
        }
        const TensorPtr y = softmax_rows(x, mask);
        for (std::size_t r = 0; r < rows; ++r) {
            double s = 0.0;
            for (std::size_t c = 0; c < cols; ++c) {
                s += y->data[r * cols + c];
                if (mask && mask->data[r * cols + c] == 0.0 && y->data[r * cols + c] != 0.0) {
                    masked_zero = false;
                }
            }
            worst = std::max(worst, std::abs(s - 1.0));
        }
    }
    return {"softmax_normalization", worst <= 1e-12 && masked_zero, worst,
            std::to_string(trials) + " matrices incl. masked"};
}

CheckResult check_edge_locality(std::uint64_t seed) {
    Rng rng(derive_seed(seed, 7));
    const std::size_t n = 4, d_n = 5, d_e = 3;
    EdgeUpdateWeights w(d_n, d_e, 6, 4, rng);
    const TensorPtr nodes = uniform_tensor({n, d_n}, rng, -1.0, 1.0);
    const TensorPtr edges = uniform_tensor({n, n, d_e}, rng, -1.0, 1.0);
    const TensorPtr base = edge_update(edges, nodes, w);

    bool pass = true;
    double worst = 0.0;
    for (std::size_t p = 0; p < n && pass; ++p) {
        for (std::size_t q = 0; q < n && pass; ++q) {
            TensorPtr bumped = tensor(edges->shape, edges->data);
            bumped->data[(p * n + q) * d_e] += 0.7;
            const TensorPtr out = edge_update(bumped, nodes, w);
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < n; ++j) {
                    const bool in_locale = (i == p && j == q) || (i == q && j == p);
                    if (in_locale) {
                        continue;
                    }
                    for (std::size_t c = 0; c < d_e; ++c) {
                        const double d = std::abs(out->data[(i * n + j) * d_e + c] -
                                                  base->data[(i * n + j) * d_e + c]);
                        worst = std::max(worst, d);
                        if (d != 0.0) {
                            pass = false;
                        }
                    }
                }
            }
        }
    }
    return {"edge_locality", pass, worst, "exhaustive on N=4, exact zero required"};
}

std::vector<CheckResult> run_verify_suite(std::uint64_t seed) {
    return {
        check_form_equivalence(seed, 100),
        check_expansion_identity(seed, 1000),
        check_degenerate_reduction(seed, 50),
        check_forward_equivariance(seed, 50, 3),
        check_gradient_full_layer(seed),
        check_softmax_normalization(seed, 200),
        check_edge_locality(seed),
    };
}

}  // namespace rt
