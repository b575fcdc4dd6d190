#include "rt/model.hpp"

#include <algorithm>

#include "rt/bytes.hpp"
#include "rt/error.hpp"

namespace rt {

namespace {

constexpr char kCheckpointMagic[4] = {'R', 'T', 'M', '1'};
constexpr std::uint32_t kCheckpointVersion = 1;

bool is_attention_kind(ModelKind k) {
    return k == ModelKind::rt || k == ModelKind::transformer;
}

std::vector<std::size_t> iota_index(std::size_t n) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) {
        idx[i] = i;
    }
    return idx;
}

}  // namespace

std::string model_kind_name(ModelKind k) {
    switch (k) {
        case ModelKind::rt:
            return "rt";
        case ModelKind::deepsets:
            return "deepsets";
        case ModelKind::mpnn:
            return "mpnn";
        case ModelKind::transformer:
            return "transformer";
    }
    return "unknown";
}

ModelKind model_kind_from_name(const std::string& name) {
    if (name == "rt") return ModelKind::rt;
    if (name == "deepsets") return ModelKind::deepsets;
    if (name == "mpnn") return ModelKind::mpnn;
    if (name == "transformer") return ModelKind::transformer;
    throw ValueError("unknown model kind '" + name + "'");
}

std::string global_mode_name(GlobalMode m) { return m == GlobalMode::cat ? "cat" : "core"; }

GlobalMode global_mode_from_name(const std::string& name) {
    if (name == "cat") return GlobalMode::cat;
    if (name == "core") return GlobalMode::core;
    throw ValueError("unknown global mode '" + name + "'");
}

void ModelConfig::normalize() {
    if (kind == ModelKind::transformer) {
        d_e = 0;
        use_edge_updates = false;
    }
    if (kind == ModelKind::deepsets || kind == ModelKind::mpnn) {
        use_edge_updates = false;
    }
}

bool ModelConfig::decodes_from_edges() const {
    if (d_e == 0) {
        return false;
    }
    if (target == TargetKind::node_pointer) {
        return ptr_from_edges;
    }
    return target == TargetKind::edge_scalar;
}

void Model::for_each_param(const std::function<void(TensorPtr&)>& fn) {
    fn(enc_node_w);
    fn(enc_node_b);
    if (enc_edge_w) {
        fn(enc_edge_w);
        fn(enc_edge_b);
    }
    for (RtLayer& layer : layers) {
        layer.attn.for_each_param(fn);
        layer.node.for_each_param(fn);
        if (cfg.use_edge_updates) {
            layer.edge.for_each_param(fn);
        }
    }
    for (BaselineLayerWeights& layer : gnn_layers) {
        layer.for_each_param(fn);
    }
    if (dec_scalar_w) {
        fn(dec_scalar_w);
        fn(dec_scalar_b);
    }
    if (dec_edge_w) {
        fn(dec_edge_w);
        fn(dec_edge_b);
    }
    if (dec_pair_f_w) {
        fn(dec_pair_f_w);
        fn(dec_pair_f_b);
        fn(dec_pair_g_w);
        fn(dec_pair_g_b);
    }
}

std::size_t Model::param_count() const {
    std::size_t n = 0;
    const_cast<Model*>(this)->for_each_param([&n](TensorPtr& t) { n += t->size(); });
    return n;
}

Model init_model(ModelConfig cfg, std::uint64_t seed) {
    cfg.normalize();
    if (cfg.heads == 0 || cfg.head_dim == 0 || cfg.d_n == 0) {
        throw ValueError("model: heads, head_dim and d_n must be positive");
    }
    Model m;
    m.cfg = cfg;
    Rng rng(derive_seed(seed, 0x6D6F64656CULL));  // "model" stream

    const std::size_t enc_in =
        cfg.raw_node_width +
        (cfg.global_mode == GlobalMode::cat ? cfg.raw_global_width : 0);
    m.enc_node_w = glorot_tensor(enc_in, cfg.d_n, rng);
    m.enc_node_b = zeros({cfg.d_n}, true);
    if (cfg.d_e > 0) {
        m.enc_edge_w = glorot_tensor(cfg.raw_edge_width, cfg.d_e, rng);
        m.enc_edge_b = zeros({cfg.d_e}, true);
    }

    if (is_attention_kind(cfg.kind)) {
        for (std::size_t l = 0; l < cfg.num_layers; ++l) {
            RtLayer layer;
            layer.attn = AttentionWeights(cfg.d_n, cfg.d_e, cfg.heads, cfg.head_dim, rng);
            layer.node = NodeUpdateWeights(cfg.d_n, cfg.d_nh, rng);
            if (cfg.use_edge_updates) {
                layer.edge = EdgeUpdateWeights(cfg.d_n, cfg.d_e, cfg.d_eh1, cfg.d_eh2, rng);
            }
            m.layers.push_back(std::move(layer));
        }
    } else {
        for (std::size_t l = 0; l < cfg.num_layers; ++l) {
            m.gnn_layers.emplace_back(cfg.d_n, cfg.d_e, rng);
        }
    }

    switch (cfg.target) {
        case TargetKind::graph_scalar:
            m.dec_scalar_w = glorot_tensor(cfg.d_n, 1, rng);
            m.dec_scalar_b = zeros({1}, true);
            break;
        case TargetKind::node_pointer:
            if (cfg.d_e > 0) {
                m.dec_edge_w = glorot_tensor(cfg.d_e, 1, rng);
                m.dec_edge_b = zeros({1}, true);
            }
            m.dec_pair_f_w = glorot_tensor(cfg.d_n, cfg.ptr_dim, rng);
            m.dec_pair_f_b = zeros({cfg.ptr_dim}, true);
            m.dec_pair_g_w = glorot_tensor(cfg.d_n, cfg.ptr_dim, rng);
            m.dec_pair_g_b = zeros({cfg.ptr_dim}, true);
            break;
        case TargetKind::edge_scalar:
            if (cfg.d_e > 0) {
                m.dec_edge_w = glorot_tensor(cfg.d_e, 1, rng);
                m.dec_edge_b = zeros({1}, true);
            } else {
                m.dec_pair_f_w = glorot_tensor(cfg.d_n, cfg.ptr_dim, rng);
                m.dec_pair_f_b = zeros({cfg.ptr_dim}, true);
                m.dec_pair_g_w = glorot_tensor(cfg.d_n, cfg.ptr_dim, rng);
                m.dec_pair_g_b = zeros({cfg.ptr_dim}, true);
            }
            break;
    }
    return m;
}

std::size_t param_count_for(const ModelConfig& cfg_in) {
    ModelConfig cfg = cfg_in;
    cfg.normalize();
    const std::size_t enc_in =
        cfg.raw_node_width +
        (cfg.global_mode == GlobalMode::cat ? cfg.raw_global_width : 0);
    std::size_t n = enc_in * cfg.d_n + cfg.d_n;
    if (cfg.d_e > 0) {
        n += cfg.raw_edge_width * cfg.d_e + cfg.d_e;
    }
    if (is_attention_kind(cfg.kind)) {
        const std::size_t attn = cfg.heads * (3 * (cfg.d_n * cfg.head_dim +
                                                   cfg.d_e * cfg.head_dim + cfg.head_dim)) +
                                 cfg.heads * cfg.head_dim * cfg.d_n + cfg.d_n;
        const std::size_t node = cfg.d_n * cfg.d_n + cfg.d_n + cfg.d_n * cfg.d_nh + cfg.d_nh +
                                 cfg.d_nh * cfg.d_n + cfg.d_n + 4 * cfg.d_n;
        std::size_t edge = 0;
        if (cfg.use_edge_updates) {
            edge = (2 * cfg.d_e + 2 * cfg.d_n) * cfg.d_eh1 + cfg.d_eh1 +
                   cfg.d_eh1 * cfg.d_e + cfg.d_e + cfg.d_e * cfg.d_eh2 + cfg.d_eh2 +
                   cfg.d_eh2 * cfg.d_e + cfg.d_e + 4 * cfg.d_e;
        }
        n += cfg.num_layers * (attn + node + edge);
    } else {
        const std::size_t layer = (cfg.d_e + 2 * cfg.d_n) * cfg.d_n + cfg.d_n +
                                  2 * cfg.d_n * cfg.d_n + cfg.d_n + cfg.d_n * cfg.d_n + cfg.d_n;
        n += cfg.num_layers * layer;
    }
    switch (cfg.target) {
        case TargetKind::graph_scalar:
            n += cfg.d_n + 1;
            break;
        case TargetKind::node_pointer:
            if (cfg.d_e > 0) {
                n += cfg.d_e + 1;
            }
            n += 2 * (cfg.d_n * cfg.ptr_dim + cfg.ptr_dim);
            break;
        case TargetKind::edge_scalar:
            if (cfg.d_e > 0) {
                n += cfg.d_e + 1;
            } else {
                n += 2 * (cfg.d_n * cfg.ptr_dim + cfg.ptr_dim);
            }
            break;
    }
    return n;
}

ModelConfig match_param_budget(ModelConfig cfg, std::size_t target) {
    cfg.normalize();
    while (param_count_for(cfg) < target) {
        ++cfg.d_nh;
    }
    return cfg;
}

Graph apply_global(const Graph& g, GlobalMode mode) {
    if (!g.global_feat) {
        return g;
    }
    const std::size_t n = g.num_nodes;
    const std::size_t d_n = g.node_width();
    const std::size_t d_e = g.edge_width();
    const std::size_t d_g = g.global_width();
    Graph out;
    if (mode == GlobalMode::cat) {
        out.num_nodes = n;
        std::vector<double> nodes(n * (d_n + d_g));
        for (std::size_t i = 0; i < n; ++i) {
            std::copy_n(g.node_feats->data.data() + i * d_n, d_n,
                        nodes.data() + i * (d_n + d_g));
            std::copy_n(g.global_feat->data.data(), d_g, nodes.data() + i * (d_n + d_g) + d_n);
        }
        out.node_feats = tensor({n, d_n + d_g}, std::move(nodes));
        out.edge_feats = g.edge_feats;
        return out;
    }
    // core node, zero-padded to the node width, absent-encoded edges
    if (d_g > d_n) {
        throw ValueError("apply_global(core): global width " + std::to_string(d_g) +
                         " exceeds node width " + std::to_string(d_n));
    }
    const std::size_t n2 = n + 1;
    out.num_nodes = n2;
    std::vector<double> nodes(n2 * d_n, 0.0);
    std::copy(g.node_feats->data.begin(), g.node_feats->data.end(), nodes.begin());
    std::copy_n(g.global_feat->data.data(), d_g, nodes.data() + n * d_n);
    out.node_feats = tensor({n2, d_n}, std::move(nodes));
    std::vector<double> edges(n2 * n2 * d_e, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        std::copy_n(g.edge_feats->data.data() + i * n * d_e, n * d_e,
                    edges.data() + i * n2 * d_e);
    }
    out.edge_feats = tensor({n2, n2, d_e}, std::move(edges));
    return out;
}

ModelOutput forward(const Model& m, const Graph& raw, Rng* dropout_rng) {
    validate(raw);
    const ModelConfig& cfg = m.cfg;
    if (raw.node_width() != cfg.raw_node_width || raw.edge_width() != cfg.raw_edge_width ||
        raw.global_width() != cfg.raw_global_width) {
        throw ShapeError("forward: raw widths (" + std::to_string(raw.node_width()) + "," +
                         std::to_string(raw.edge_width()) + "," +
                         std::to_string(raw.global_width()) + ") do not match config (" +
                         std::to_string(cfg.raw_node_width) + "," +
                         std::to_string(cfg.raw_edge_width) + "," +
                         std::to_string(cfg.raw_global_width) + ")");
    }
    const Graph g = apply_global(raw, cfg.global_mode);
    const std::size_t n = g.num_nodes;

    TensorPtr nodes = add_bias(matmul(g.node_feats, m.enc_node_w), m.enc_node_b);
    TensorPtr edges;
    if (cfg.d_e > 0) {
        TensorPtr e_flat = reshape(g.edge_feats, {n * n, raw.edge_width()});
        edges = reshape(add_bias(matmul(e_flat, m.enc_edge_w), m.enc_edge_b), {n, n, cfg.d_e});
    }

    AttendOptions opts;
    if (dropout_rng && cfg.dropout_rate > 0.0) {
        opts.dropout_rate = cfg.dropout_rate;
        opts.rng = dropout_rng;
    }
    if (is_attention_kind(cfg.kind)) {
        for (const RtLayer& layer : m.layers) {
            Graph state{n, nodes, edges, nullptr};
            nodes = attend(state, layer.attn, layer.node, opts);
            if (cfg.use_edge_updates && cfg.d_e > 0) {
                edges = edge_update(edges, nodes, layer.edge);
            }
        }
    } else {
        for (const BaselineLayerWeights& layer : m.gnn_layers) {
            Graph state{n, nodes, edges, nullptr};
            nodes = cfg.kind == ModelKind::deepsets ? deepsets_layer(state, layer)
                                                    : mpnn_layer(state, layer);
        }
    }

    ModelOutput out;
    out.nodes = nodes;
    out.edges = edges;
    out.decode_nodes = raw.num_nodes;  // the core node, if any, is never decoded
    return out;
}

TensorPtr edge_logits(const TensorPtr& edges, const TensorPtr& head_w, const TensorPtr& head_b) {
    if (!edges || edges->shape.size() != 3 || edges->shape[0] != edges->shape[1]) {
        throw ShapeError("edge_logits: expects N×N×d_e edges");
    }
    const std::size_t n = edges->shape[0];
    const std::size_t d_e = edges->shape[2];
    TensorPtr flat = reshape(edges, {n * n, d_e});
    return reshape(add_bias(matmul(flat, head_w), head_b), {n, n});
}

std::vector<std::uint32_t> decode_pointers_from_edges(const TensorPtr& edges,
                                                      const TensorPtr& head_w,
                                                      const TensorPtr& head_b) {
    return argmax_rows(*edge_logits(edges, head_w, head_b));
}

TensorPtr pair_logits(const TensorPtr& nodes, const TensorPtr& f_w, const TensorPtr& f_b,
                      const TensorPtr& g_w, const TensorPtr& g_b) {
    if (!nodes || nodes->shape.size() != 2) {
        throw ShapeError("pair_logits: expects N×d_n nodes");
    }
    const std::size_t n = nodes->shape[0];
    TensorPtr f = add_bias(matmul(nodes, f_w), f_b);
    TensorPtr g = add_bias(matmul(nodes, g_w), g_b);
    std::vector<std::size_t> idx_i(n * n), idx_j(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            idx_i[i * n + j] = i;
            idx_j[i * n + j] = j;
        }
    }
    return reshape(row_dot(gather_rows(f, idx_i), gather_rows(g, idx_j)), {n, n});
}

std::vector<std::uint32_t> decode_pointers_from_nodes(const TensorPtr& nodes, const TensorPtr& f_w,
                                                      const TensorPtr& f_b, const TensorPtr& g_w,
                                                      const TensorPtr& g_b) {
    return argmax_rows(*pair_logits(nodes, f_w, f_b, g_w, g_b));
}

TensorPtr decode_graph_scalar(const TensorPtr& nodes, const TensorPtr& head_w,
                              const TensorPtr& head_b) {
    if (!nodes || nodes->shape.size() != 2) {
        throw ShapeError("decode_graph_scalar: expects N×d_n nodes");
    }
    const std::size_t n = nodes->shape[0];
    TensorPtr pool = full({1, n}, 1.0 / static_cast<double>(n));
    return reshape(add_bias(matmul(matmul(pool, nodes), head_w), head_b), {1});
}

namespace {

TensorPtr decoded_nodes(const ModelOutput& out) {
    if (out.decode_nodes == out.nodes->shape[0]) {
        return out.nodes;
    }
    return gather_rows(out.nodes, iota_index(out.decode_nodes));
}

TensorPtr decoded_edges(const Model& m, const ModelOutput& out) {
    if (!out.edges) {
        throw ShapeError("decode: model '" + model_kind_name(m.cfg.kind) +
                         "' produced no edge tensor");
    }
    const std::size_t n_total = out.edges->shape[0];
    const std::size_t n = out.decode_nodes;
    if (n == n_total) {
        return out.edges;
    }
    const std::size_t d_e = out.edges->shape[2];
    std::vector<std::size_t> idx(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            idx[i * n + j] = i * n_total + j;
        }
    }
    return reshape(gather_rows(reshape(out.edges, {n_total * n_total, d_e}), idx), {n, n, d_e});
}

}  // namespace

TensorPtr predict_graph_scalar(const Model& m, const ModelOutput& out) {
    if (!m.dec_scalar_w) {
        throw ShapeError("predict_graph_scalar: model has no scalar head");
    }
    return decode_graph_scalar(decoded_nodes(out), m.dec_scalar_w, m.dec_scalar_b);
}

TensorPtr predict_pointer_logits(const Model& m, const ModelOutput& out, bool from_edges) {
    if (from_edges) {
        if (!m.dec_edge_w) {
            throw ShapeError("predict_pointer_logits: model has no edge head");
        }
        return edge_logits(decoded_edges(m, out), m.dec_edge_w, m.dec_edge_b);
    }
    if (!m.dec_pair_f_w) {
        throw ShapeError("predict_pointer_logits: model has no pair head");
    }
    return pair_logits(decoded_nodes(out), m.dec_pair_f_w, m.dec_pair_f_b, m.dec_pair_g_w,
                       m.dec_pair_g_b);
}

TensorPtr predict_edge_scores(const Model& m, const ModelOutput& out) {
    if (m.dec_edge_w) {
        return edge_logits(decoded_edges(m, out), m.dec_edge_w, m.dec_edge_b);
    }
    if (m.dec_pair_f_w) {
        return pair_logits(decoded_nodes(out), m.dec_pair_f_w, m.dec_pair_f_b, m.dec_pair_g_w,
                           m.dec_pair_g_b);
    }
    throw ShapeError("predict_edge_scores: model has no edge or pair head");
}

std::vector<std::uint8_t> checkpoint_bytes(const Model& m) {
    std::vector<std::uint8_t> out;
    out.insert(out.end(), kCheckpointMagic, kCheckpointMagic + 4);
    put_u32(out, kCheckpointVersion);
    const ModelConfig& c = m.cfg;
    put_u8(out, static_cast<std::uint8_t>(c.kind));
    put_u8(out, static_cast<std::uint8_t>(c.target));
    put_u8(out, static_cast<std::uint8_t>(c.global_mode));
    put_u8(out, static_cast<std::uint8_t>((c.ptr_from_edges ? 1 : 0) |
                                          (c.use_edge_updates ? 2 : 0)));
    for (const std::size_t v :
         {c.raw_node_width, c.raw_edge_width, c.raw_global_width, c.num_layers, c.heads,
          c.head_dim, c.d_n, c.d_e, c.d_nh, c.d_eh1, c.d_eh2, c.ptr_dim}) {
        put_u32(out, static_cast<std::uint32_t>(v));
    }
    put_f64(out, c.dropout_rate);
    std::uint32_t count = 0;
    const_cast<Model&>(m).for_each_param([&count](TensorPtr&) { ++count; });
    put_u32(out, count);
    const_cast<Model&>(m).for_each_param([&out](TensorPtr& t) {
        put_u32(out, static_cast<std::uint32_t>(t->shape.size()));
        for (const std::size_t e : t->shape) {
            put_u32(out, static_cast<std::uint32_t>(e));
        }
        for (const double v : t->data) {
            put_f64(out, v);
        }
    });
    return out;
}

void save_checkpoint(const std::string& path, const Model& m) {
    write_file_bytes(path, checkpoint_bytes(m));
}

Model load_checkpoint(const std::string& path) {
    const std::vector<std::uint8_t> bytes = read_file_bytes(path);
    ByteReader r{bytes};
    if (!r.magic(kCheckpointMagic)) {
        throw IoError("checkpoint: bad magic, expected RTM1");
    }
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion) {
        throw IoError("checkpoint: unsupported version " + std::to_string(version));
    }
    ModelConfig c;
    c.kind = static_cast<ModelKind>(r.u8());
    c.target = static_cast<TargetKind>(r.u8());
    c.global_mode = static_cast<GlobalMode>(r.u8());
    const std::uint8_t flags = r.u8();
    c.ptr_from_edges = (flags & 1) != 0;
    c.use_edge_updates = (flags & 2) != 0;
    c.raw_node_width = r.u32();
    c.raw_edge_width = r.u32();
    c.raw_global_width = r.u32();
    c.num_layers = r.u32();
    c.heads = r.u32();
    c.head_dim = r.u32();
    c.d_n = r.u32();
    c.d_e = r.u32();
    c.d_nh = r.u32();
    c.d_eh1 = r.u32();
    c.d_eh2 = r.u32();
    c.ptr_dim = r.u32();
    c.dropout_rate = r.f64();

    Model m = init_model(c, 0);
    const std::uint32_t count = r.u32();
    std::uint32_t expected = 0;
    m.for_each_param([&expected](TensorPtr&) { ++expected; });
    if (count != expected) {
        throw IoError("checkpoint: has " + std::to_string(count) + " tensors, model needs " +
                      std::to_string(expected));
    }
    m.for_each_param([&r](TensorPtr& t) {
        const std::uint32_t rank = r.u32();
        Shape shape(rank);
        for (std::uint32_t i = 0; i < rank; ++i) {
            shape[i] = r.u32();
        }
        if (shape != t->shape) {
            throw IoError("checkpoint: tensor shape " + shape_str(shape) +
                          " does not match model shape " + shape_str(t->shape));
        }
        for (double& v : t->data) {
            v = r.f64();
        }
    });
    if (r.pos != bytes.size()) {
        throw IoError("checkpoint: trailing bytes");
    }
    return m;
}

}  // namespace rt
