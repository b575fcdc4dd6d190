#include "rt/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include "rt/error.hpp"
#include "rt/rng.hpp"

namespace rt {

namespace {

constexpr std::size_t kMaxResamples = 10000;

void push_edge(TreeGraph& t, std::size_t a, std::size_t b) {
    t.edges.emplace_back(a, b);
    t.adj[a].push_back(b);
    t.adj[b].push_back(a);
}

Graph lobster_features(const TreeGraph& tree, std::size_t source, std::size_t dest) {
    const std::size_t n = tree.num_nodes;
    Graph g = make_graph(n, 3, 1);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t channel = i == source ? 0 : (i == dest ? 1 : 2);
        g.node_feats->data[i * 3 + channel] = 1.0;
    }
    for (const auto& [a, b] : tree.edges) {
        g.edge_feats->data[a * n + b] = 1.0;
        g.edge_feats->data[b * n + a] = 1.0;
    }
    return g;
}

struct LobsterDraw {
    TreeGraph tree;
    std::size_t source = 0;
    std::size_t dest = 0;
};

LobsterDraw draw_lobster(const LobsterSpec& spec, Rng& rng) {
    for (std::size_t attempt = 0; attempt < kMaxResamples; ++attempt) {
        const std::size_t s_max = std::max<std::size_t>(2, spec.n_max / 2);
        const std::size_t s = 2 + static_cast<std::size_t>(rng.below(s_max - 1));
        TreeGraph t;
        t.num_nodes = s;
        t.adj.resize(s);
        for (std::size_t i = 0; i + 1 < s; ++i) {
            push_edge(t, i, i + 1);
        }
        for (std::size_t i = 0; i < s; ++i) {
            if (rng.bernoulli(spec.p_leg)) {
                const std::size_t leg = t.num_nodes++;
                t.adj.emplace_back();
                push_edge(t, i, leg);
                if (rng.bernoulli(spec.p_foot)) {
                    const std::size_t foot = t.num_nodes++;
                    t.adj.emplace_back();
                    push_edge(t, leg, foot);
                }
            }
        }
        if (t.num_nodes < spec.n_min || t.num_nodes >= spec.n_max) {
            continue;
        }
        LobsterDraw draw;
        draw.source = static_cast<std::size_t>(rng.below(t.num_nodes));
        draw.dest = static_cast<std::size_t>(rng.below(t.num_nodes - 1));
        if (draw.dest >= draw.source) {
            ++draw.dest;
        }
        draw.tree = std::move(t);
        return draw;
    }
    throw GeneratorError("lobster: no sample landed in [" + std::to_string(spec.n_min) + "," +
                         std::to_string(spec.n_max) + ") after " +
                         std::to_string(kMaxResamples) + " attempts");
}

BfsResult bfs_tree(const TreeGraph& t, std::size_t source) {
    BfsResult r;
    r.dist.assign(t.num_nodes, -1);
    r.parent.assign(t.num_nodes, -1);
    std::queue<std::size_t> q;
    r.dist[source] = 0;
    r.parent[source] = static_cast<int>(source);
    q.push(source);
    while (!q.empty()) {
        const std::size_t u = q.front();
        q.pop();
        for (const std::size_t v : t.adj[u]) {
            if (r.dist[v] < 0) {
                r.dist[v] = r.dist[u] + 1;
                r.parent[v] = static_cast<int>(u);
                q.push(v);
            }
        }
    }
    return r;
}

std::string lobster_params(const LobsterSpec& spec) {
    return "n_min=" + std::to_string(spec.n_min) + ",n_max=" + std::to_string(spec.n_max) +
           ",p_leg=" + std::to_string(spec.p_leg) + ",p_foot=" + std::to_string(spec.p_foot);
}

}  // namespace

void validate(const LobsterSpec& spec) {
    if (spec.n_min < 1 || spec.n_min >= spec.n_max) {
        throw GeneratorError("lobster: need 1 <= n_min < n_max, got [" +
                             std::to_string(spec.n_min) + "," + std::to_string(spec.n_max) + ")");
    }
    if (spec.n_max <= 4) {
        throw GeneratorError("lobster: n_max " + std::to_string(spec.n_max) +
                             " cannot host spine plus endpoints");
    }
    if (spec.p_leg < 0.0 || spec.p_leg > 1.0 || spec.p_foot < 0.0 || spec.p_foot > 1.0) {
        throw GeneratorError("lobster: probabilities must lie in [0,1]");
    }
}

TreeGraph gen_lobster_tree(const LobsterSpec& spec) {
    validate(spec);
    Rng rng(spec.seed);
    return draw_lobster(spec, rng).tree;
}

TaskExample gen_lobster(const LobsterSpec& spec) {
    validate(spec);
    Rng rng(spec.seed);
    const LobsterDraw draw = draw_lobster(spec, rng);
    const BfsResult bfs = bfs_tree(draw.tree, draw.source);

    TaskExample ex;
    ex.input = lobster_features(draw.tree, draw.source, draw.dest);
    ex.target_kind = TargetKind::graph_scalar;
    ex.scalar_target = static_cast<double>(bfs.dist[draw.dest]);
    ex.meta = {"lobster", spec.seed, lobster_params(spec)};
    return ex;
}

TaskExample gen_bfs_pointers(const LobsterSpec& spec) {
    validate(spec);
    Rng rng(spec.seed);
    const LobsterDraw draw = draw_lobster(spec, rng);
    const BfsResult bfs = bfs_tree(draw.tree, draw.source);

    TaskExample ex;
    ex.input = lobster_features(draw.tree, draw.source, draw.dest);
    ex.target_kind = TargetKind::node_pointer;
    ex.pointer_target.resize(draw.tree.num_nodes);
    for (std::size_t i = 0; i < draw.tree.num_nodes; ++i) {
        ex.pointer_target[i] = static_cast<std::uint32_t>(bfs.parent[i]);
    }
    ex.meta = {"bfs_ptr", spec.seed, lobster_params(spec)};
    return ex;
}

TaskExample gen_fw_step(std::size_t n, std::uint64_t seed) {
    if (n < 1) {
        throw GeneratorError("fw_step: n must be >= 1");
    }
    Rng rng(seed);
    std::vector<double> w(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i != j) {
                w[i * n + j] = rng.uniform();
            }
        }
    }
    std::vector<double> target(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double best = w[i * n] + w[j];  // k = 0
            for (std::size_t k = 1; k < n; ++k) {
                best = std::min(best, w[i * n + k] + w[k * n + j]);
            }
            target[i * n + j] = best;
        }
    }
    TaskExample ex;
    ex.input.num_nodes = n;
    ex.input.node_feats = full({n, 1}, 1.0);
    ex.input.edge_feats = tensor({n, n, 1}, std::move(w));
    ex.target_kind = TargetKind::edge_scalar;
    ex.edge_target = tensor({n, n}, std::move(target));
    ex.meta = {"fw_step", seed, "n=" + std::to_string(n)};
    return ex;
}

BfsResult bfs_oracle(const Graph& g, std::size_t source) {
    if (source >= g.num_nodes) {
        throw ValueError("bfs_oracle: source " + std::to_string(source) + " out of [0," +
                         std::to_string(g.num_nodes) + ")");
    }
    return bfs_tree(tree_from_graph(g), source);
}

double relative_loss(double y, double yhat) {
    if (y == 0.0) {
        throw ValueError("relative_loss: label must be nonzero");
    }
    return std::abs(y - yhat) / std::abs(y);
}

double pointer_score(const std::vector<std::uint32_t>& pred,
                     const std::vector<std::uint32_t>& target) {
    if (pred.size() != target.size() || pred.empty()) {
        throw ValueError("pointer_score: size mismatch (" + std::to_string(pred.size()) + " vs " +
                         std::to_string(target.size()) + ")");
    }
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        hits += pred[i] == target[i] ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(pred.size());
}

TreeGraph tree_from_graph(const Graph& g) {
    const std::size_t n = g.num_nodes;
    const std::size_t d_e = g.edge_width();
    if (d_e < 1) {
        throw ValueError("tree_from_graph: needs a presence-flag edge channel");
    }
    TreeGraph t;
    t.num_nodes = n;
    t.adj.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (g.edge_feats->data[(i * n + j) * d_e] > 0.5) {
                push_edge(t, i, j);
            }
        }
    }
    return t;
}

bool double_leaf_removal_yields_path(const TreeGraph& g) {
    std::vector<bool> removed(g.num_nodes, false);
    std::vector<std::size_t> degree(g.num_nodes, 0);
    for (std::size_t i = 0; i < g.num_nodes; ++i) {
        degree[i] = g.adj[i].size();
    }
    for (int round = 0; round < 2; ++round) {
        std::vector<std::size_t> leaves;
        for (std::size_t i = 0; i < g.num_nodes; ++i) {
            if (!removed[i] && degree[i] <= 1) {
                leaves.push_back(i);
            }
        }
        for (const std::size_t leaf : leaves) {
            removed[leaf] = true;
            for (const std::size_t nb : g.adj[leaf]) {
                if (!removed[nb] && degree[nb] > 0) {
                    --degree[nb];
                }
            }
        }
    }
    std::size_t remaining = 0, start = g.num_nodes;
    for (std::size_t i = 0; i < g.num_nodes; ++i) {
        if (!removed[i]) {
            ++remaining;
            if (degree[i] > 2) {
                return false;
            }
            if (start == g.num_nodes) {
                start = i;
            }
        }
    }
    if (remaining == 0) {
        return true;
    }
    // connectivity of the remainder
    std::vector<bool> seen(g.num_nodes, false);
    std::vector<std::size_t> stack{start};
    seen[start] = true;
    std::size_t reached = 0;
    while (!stack.empty()) {
        const std::size_t u = stack.back();
        stack.pop_back();
        ++reached;
        for (const std::size_t v : g.adj[u]) {
            if (!removed[v] && !seen[v]) {
                seen[v] = true;
                stack.push_back(v);
            }
        }
    }
    return reached == remaining;
}

}  // namespace rt
