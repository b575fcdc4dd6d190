#pragma once

#include <functional>
#include <string>
#include <vector>

#include "rt/attention.hpp"
#include "rt/baselines.hpp"
#include "rt/edge_update.hpp"
#include "rt/graph.hpp"

namespace rt {

enum class ModelKind : std::uint8_t {
    rt = 0,
    deepsets = 1,
    mpnn = 2,
    transformer = 3,  // edge-free: d_e forced to 0, no edge updates
};

enum class GlobalMode : std::uint8_t {
    cat = 0,   // broadcast-concatenate the global vector onto every node
    core = 1,  // append a dedicated core node carrying the global vector
};

std::string model_kind_name(ModelKind k);
ModelKind model_kind_from_name(const std::string& name);
std::string global_mode_name(GlobalMode m);
GlobalMode global_mode_from_name(const std::string& name);

struct ModelConfig {
    ModelKind kind = ModelKind::rt;
    TargetKind target = TargetKind::graph_scalar;

    std::size_t raw_node_width = 1;
    std::size_t raw_edge_width = 1;
    std::size_t raw_global_width = 0;

    std::size_t num_layers = 8;
    std::size_t heads = 8;
    std::size_t head_dim = 28;
    std::size_t d_n = 180;  // node width (the per-layer output width)
    std::size_t d_e = 128;
    std::size_t d_nh = 12;
    std::size_t d_eh1 = 32;
    std::size_t d_eh2 = 8;
    std::size_t ptr_dim = 16;  // width of the node-pair decoding heads

    GlobalMode global_mode = GlobalMode::cat;
    bool ptr_from_edges = true;
    bool use_edge_updates = true;
    double dropout_rate = 0.0;

    // Applies kind-implied constraints (transformer => d_e = 0, no edge
    // updates; GNN baselines never update edges).
    void normalize();
    bool decodes_from_edges() const;
};

struct RtLayer {
    AttentionWeights attn;
    NodeUpdateWeights node;
    EdgeUpdateWeights edge;  // unused when edge updates are off
};

struct Model {
    ModelConfig cfg;

    TensorPtr enc_node_w, enc_node_b;
    TensorPtr enc_edge_w, enc_edge_b;  // null when d_e == 0

    std::vector<RtLayer> layers;                  // rt / transformer
    std::vector<BaselineLayerWeights> gnn_layers;  // deepsets / mpnn

    TensorPtr dec_scalar_w, dec_scalar_b;  // graph_scalar head, d_n -> 1
    TensorPtr dec_edge_w, dec_edge_b;      // edge head, d_e -> 1
    TensorPtr dec_pair_f_w, dec_pair_f_b;  // node-pair heads, d_n -> ptr_dim
    TensorPtr dec_pair_g_w, dec_pair_g_b;

    void for_each_param(const std::function<void(TensorPtr&)>& fn);
    std::size_t param_count() const;
};

// Deterministic initialization: one seed drives the whole parameter tree.
Model init_model(ModelConfig cfg, std::uint64_t seed);

// Analytic parameter count for a config (no allocation); matches
// init_model(cfg, s).param_count().
std::size_t param_count_for(const ModelConfig& cfg);

// Raises d_nh until the config's parameter count reaches at least `target`.
ModelConfig match_param_budget(ModelConfig cfg, std::size_t target);

// Global-vector handling at the raw-feature level. Identity when the graph
// carries no global vector. cat widens every node row by d_g; core appends
// one node holding the global vector zero-padded to the node width (d_g must
// not exceed it), with absent-encoded (all-zero) edges to and from it.
Graph apply_global(const Graph& g, GlobalMode mode);

struct ModelOutput {
    TensorPtr nodes;             // N_total×d_n
    TensorPtr edges;             // N_total×N_total×d_e, null when d_e == 0
    std::size_t decode_nodes = 0;  // excludes the core node, when present
};

// encode -> L × (node update; then edge update) -> final tensors.
ModelOutput forward(const Model& m, const Graph& raw, Rng* dropout_rng = nullptr);

// ---- decoding -------------------------------------------------------------

// logit_ij = head(e_ij); pointer(i) = argmax_j, lowest index on ties
TensorPtr edge_logits(const TensorPtr& edges, const TensorPtr& head_w, const TensorPtr& head_b);
std::vector<std::uint32_t> decode_pointers_from_edges(const TensorPtr& edges,
                                                      const TensorPtr& head_w,
                                                      const TensorPtr& head_b);

// logit_ij = <f(n_i), g(n_j)> with two linear maps d_n -> d_p
TensorPtr pair_logits(const TensorPtr& nodes, const TensorPtr& f_w, const TensorPtr& f_b,
                      const TensorPtr& g_w, const TensorPtr& g_b);
std::vector<std::uint32_t> decode_pointers_from_nodes(const TensorPtr& nodes, const TensorPtr& f_w,
                                                      const TensorPtr& f_b, const TensorPtr& g_w,
                                                      const TensorPtr& g_b);

// mean over node vectors, then a linear map to one scalar
TensorPtr decode_graph_scalar(const TensorPtr& nodes, const TensorPtr& head_w,
                              const TensorPtr& head_b);

// model-level prediction helpers (respect decode_nodes and head selection)
TensorPtr predict_graph_scalar(const Model& m, const ModelOutput& out);
TensorPtr predict_pointer_logits(const Model& m, const ModelOutput& out, bool from_edges);
TensorPtr predict_edge_scores(const Model& m, const ModelOutput& out);

// ---- checkpoints ------------------------------------------------------------

// Versioned binary container, magic "RTM1": config echo, then every parameter
// tensor in declaration order, each prefixed by rank and extents.
void save_checkpoint(const std::string& path, const Model& m);
Model load_checkpoint(const std::string& path);
std::vector<std::uint8_t> checkpoint_bytes(const Model& m);

}  // namespace rt
