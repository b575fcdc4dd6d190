#pragma once

#include <cstdint>
#include <vector>

#include "rt/graph.hpp"

namespace rt {

// Lobster family: a tree that becomes a path (possibly empty) after two
// rounds of leaf removal. Construction: spine of length s ~ U[2, n_max/2],
// a leg on each spine node with probability p_leg, a foot on each leg with
// probability p_foot; resampled until the node count lands in [n_min, n_max).
struct LobsterSpec {
    std::size_t n_min = 4;
    std::size_t n_max = 16;
    double p_leg = 0.5;
    double p_foot = 0.5;
    std::uint64_t seed = 1;
};

void validate(const LobsterSpec& spec);

// Undirected tree as adjacency lists; intermediate form shared by the
// generators and the oracles.
struct TreeGraph {
    std::size_t num_nodes = 0;
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    std::vector<std::vector<std::size_t>> adj;
};

TreeGraph gen_lobster_tree(const LobsterSpec& spec);

// Shortest-path distance regression over a lobster graph. Node features are
// a 3-wide one-hot (source / destination / remaining); edge features are a
// single symmetric presence flag; target is the hop count, always >= 1.
TaskExample gen_lobster(const LobsterSpec& spec);

// Same graph family; target is the BFS parent of every node (parent of the
// source is itself).
TaskExample gen_bfs_pointers(const LobsterSpec& spec);

// One step of min-plus relaxation: w_ij ~ U(0,1) with w_ii = 0; target
// T_ij = min_k (w_ik + w_kj). Node features are all-ones width 1.
TaskExample gen_fw_step(std::size_t n, std::uint64_t seed);

struct BfsResult {
    std::vector<int> dist;     // -1 when unreachable
    std::vector<int> parent;   // parent[source] = source; -1 when unreachable
};

// BFS over presence-flag adjacency (feature channel 0 > 0.5), ascending
// neighbor order.
BfsResult bfs_oracle(const Graph& g, std::size_t source);

// |y - yhat| / |y|; y must be nonzero.
double relative_loss(double y, double yhat);

// Accuracy of per-node pointer predictions (micro-F1 for single-label
// prediction equals accuracy).
double pointer_score(const std::vector<std::uint32_t>& pred,
                     const std::vector<std::uint32_t>& target);

// Presence-flag adjacency lifted back out of an encoded example.
TreeGraph tree_from_graph(const Graph& g);

// True when g is a path (or empty); used by the lobster double-peel check.
bool double_leaf_removal_yields_path(const TreeGraph& g);

}  // namespace rt
