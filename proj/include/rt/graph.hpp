#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rt/tensor.hpp"

namespace rt {

// Directed attributed graph over a complete node-pair grid. edge_feats is
// dense N×N×d_e; entry (i,j) is the edge pointing from node j to node i, and
// self-pairs (i,i) carry real feature vectors. Absent edges are encoded in
// the features (presence flag 0), never by missing storage.
struct Graph {
    std::size_t num_nodes = 0;
    TensorPtr node_feats;    // N×d_n
    TensorPtr edge_feats;    // N×N×d_e
    TensorPtr global_feat;   // d_g, or null when absent

    std::size_t node_width() const { return node_feats ? node_feats->shape[1] : 0; }
    std::size_t edge_width() const { return edge_feats ? edge_feats->shape[2] : 0; }
    std::size_t global_width() const { return global_feat ? global_feat->shape[0] : 0; }
};

Graph make_graph(std::size_t num_nodes, std::size_t d_n, std::size_t d_e);

// Throws on any invariant violation: wrong ranks/extents, N < 1, non-finite
// features.
void validate(const Graph& g);

// Reindexes nodes: node pi(i) of the result carries node i's features, and
// edge (pi(i), pi(j)) carries edge (i,j). The global vector is unchanged.
Graph permute(const Graph& g, const std::vector<std::size_t>& pi);

// Binary little-endian format, magic "RTG1": u32 N, d_n, d_e, d_g (0 when
// absent), then node/edge/global float64 blocks in row-major order.
std::vector<std::uint8_t> serialize(const Graph& g);
Graph deserialize(const std::vector<std::uint8_t>& bytes);

enum class TargetKind : std::uint8_t {
    graph_scalar = 0,
    node_pointer = 1,
    edge_scalar = 2,
};

std::string target_kind_name(TargetKind k);

struct ExampleMeta {
    std::string generator;
    std::uint64_t seed = 0;
    std::string params;
};

struct TaskExample {
    Graph input;
    TargetKind target_kind = TargetKind::graph_scalar;
    double scalar_target = 0.0;                    // graph_scalar
    std::vector<std::uint32_t> pointer_target;     // node_pointer, length N
    TensorPtr edge_target;                         // edge_scalar, N×N
    ExampleMeta meta;                              // provenance; not serialized
};

void validate(const TaskExample& ex);

// Dataset file: u32 count, then per record the graph bytes, target_kind u8,
// and the target payload.
void save_dataset(const std::string& path, const std::vector<TaskExample>& examples);
std::vector<TaskExample> load_dataset(const std::string& path);

}  // namespace rt
