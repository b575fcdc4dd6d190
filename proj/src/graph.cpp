#include "rt/graph.hpp"

#include <cmath>
#include <cstring>

#include "rt/bytes.hpp"
#include "rt/error.hpp"

namespace rt {

namespace {

constexpr char kGraphMagic[4] = {'R', 'T', 'G', '1'};

void check_finite(const Tensor& t, const char* what) {
    for (const double v : t.data) {
        if (!std::isfinite(v)) {
            throw ValueError(std::string("graph: non-finite value in ") + what);
        }
    }
}

void serialize_graph_into(std::vector<std::uint8_t>& out, const Graph& g) {
    out.insert(out.end(), kGraphMagic, kGraphMagic + 4);
    put_u32(out, static_cast<std::uint32_t>(g.num_nodes));
    put_u32(out, static_cast<std::uint32_t>(g.node_width()));
    put_u32(out, static_cast<std::uint32_t>(g.edge_width()));
    put_u32(out, static_cast<std::uint32_t>(g.global_width()));
    for (const double v : g.node_feats->data) {
        put_f64(out, v);
    }
    for (const double v : g.edge_feats->data) {
        put_f64(out, v);
    }
    if (g.global_feat) {
        for (const double v : g.global_feat->data) {
            put_f64(out, v);
        }
    }
}

Graph deserialize_graph_from(ByteReader& r) {
    if (!r.magic(kGraphMagic)) {
        throw IoError("graph: bad magic, expected RTG1");
    }
    Graph g;
    g.num_nodes = r.u32();
    const std::size_t d_n = r.u32();
    const std::size_t d_e = r.u32();
    const std::size_t d_g = r.u32();
    const std::size_t n = g.num_nodes;
    std::vector<double> nodes(n * d_n);
    for (double& v : nodes) {
        v = r.f64();
    }
    g.node_feats = tensor({n, d_n}, std::move(nodes));
    std::vector<double> edges(n * n * d_e);
    for (double& v : edges) {
        v = r.f64();
    }
    g.edge_feats = tensor({n, n, d_e}, std::move(edges));
    if (d_g > 0) {
        std::vector<double> glob(d_g);
        for (double& v : glob) {
            v = r.f64();
        }
        g.global_feat = tensor({d_g}, std::move(glob));
    }
    validate(g);
    return g;
}

}  // namespace

Graph make_graph(std::size_t num_nodes, std::size_t d_n, std::size_t d_e) {
    Graph g;
    g.num_nodes = num_nodes;
    g.node_feats = zeros({num_nodes, d_n});
    g.edge_feats = zeros({num_nodes, num_nodes, d_e});
    return g;
}

void validate(const Graph& g) {
    if (g.num_nodes < 1) {
        throw ValueError("graph: num_nodes must be >= 1");
    }
    if (!g.node_feats || g.node_feats->shape.size() != 2 ||
        g.node_feats->shape[0] != g.num_nodes) {
        throw ShapeError("graph: node_feats must be [" + std::to_string(g.num_nodes) +
                         "xd_n], got " +
                         (g.node_feats ? shape_str(g.node_feats->shape) : std::string("null")));
    }
    if (!g.edge_feats || g.edge_feats->shape.size() != 3 ||
        g.edge_feats->shape[0] != g.num_nodes || g.edge_feats->shape[1] != g.num_nodes) {
        throw ShapeError("graph: edge_feats must be [" + std::to_string(g.num_nodes) + "x" +
                         std::to_string(g.num_nodes) + "xd_e], got " +
                         (g.edge_feats ? shape_str(g.edge_feats->shape) : std::string("null")));
    }
    if (g.global_feat && g.global_feat->shape.size() != 1) {
        throw ShapeError("graph: global_feat must be rank-1, got " +
                         shape_str(g.global_feat->shape));
    }
    check_finite(*g.node_feats, "node_feats");
    check_finite(*g.edge_feats, "edge_feats");
    if (g.global_feat) {
        check_finite(*g.global_feat, "global_feat");
    }
}

Graph permute(const Graph& g, const std::vector<std::size_t>& pi) {
    const std::size_t n = g.num_nodes;
    if (pi.size() != n) {
        throw ValueError("permute: permutation has length " + std::to_string(pi.size()) +
                         " for " + std::to_string(n) + " nodes");
    }
    std::vector<bool> seen(n, false);
    for (const std::size_t p : pi) {
        if (p >= n || seen[p]) {
            throw ValueError("permute: not a bijection on [0," + std::to_string(n) + ")");
        }
        seen[p] = true;
    }
    const std::size_t d_n = g.node_width();
    const std::size_t d_e = g.edge_width();
    Graph out;
    out.num_nodes = n;
    std::vector<double> nodes(n * d_n);
    for (std::size_t i = 0; i < n; ++i) {
        std::copy_n(g.node_feats->data.data() + i * d_n, d_n, nodes.data() + pi[i] * d_n);
    }
    out.node_feats = tensor({n, d_n}, std::move(nodes));
    std::vector<double> edges(n * n * d_e);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            std::copy_n(g.edge_feats->data.data() + (i * n + j) * d_e, d_e,
                        edges.data() + (pi[i] * n + pi[j]) * d_e);
        }
    }
    out.edge_feats = tensor({n, n, d_e}, std::move(edges));
    out.global_feat = g.global_feat;
    return out;
}

std::vector<std::uint8_t> serialize(const Graph& g) {
    validate(g);
    std::vector<std::uint8_t> out;
    out.reserve(20 + 8 * (g.node_feats->size() + g.edge_feats->size() +
                          (g.global_feat ? g.global_feat->size() : 0)));
    serialize_graph_into(out, g);
    return out;
}

Graph deserialize(const std::vector<std::uint8_t>& bytes) {
    ByteReader r{bytes};
    Graph g = deserialize_graph_from(r);
    if (r.pos != bytes.size()) {
        throw IoError("graph: " + std::to_string(bytes.size() - r.pos) + " trailing bytes");
    }
    return g;
}

std::string target_kind_name(TargetKind k) {
    switch (k) {
        case TargetKind::graph_scalar:
            return "graph_scalar";
        case TargetKind::node_pointer:
            return "node_pointer";
        case TargetKind::edge_scalar:
            return "edge_scalar";
    }
    return "unknown";
}

void validate(const TaskExample& ex) {
    validate(ex.input);
    const std::size_t n = ex.input.num_nodes;
    switch (ex.target_kind) {
        case TargetKind::graph_scalar:
            if (!std::isfinite(ex.scalar_target)) {
                throw ValueError("example: non-finite scalar target");
            }
            break;
        case TargetKind::node_pointer:
            if (ex.pointer_target.size() != n) {
                throw ShapeError("example: pointer target length " +
                                 std::to_string(ex.pointer_target.size()) + " for N=" +
                                 std::to_string(n));
            }
            for (const std::uint32_t p : ex.pointer_target) {
                if (p >= n) {
                    throw ValueError("example: pointer " + std::to_string(p) +
                                     " out of [0," + std::to_string(n) + ")");
                }
            }
            break;
        case TargetKind::edge_scalar:
            if (!ex.edge_target || ex.edge_target->shape != Shape{n, n}) {
                throw ShapeError("example: edge target must be [" + std::to_string(n) + "x" +
                                 std::to_string(n) + "]");
            }
            break;
    }
}

void save_dataset(const std::string& path, const std::vector<TaskExample>& examples) {
    std::vector<std::uint8_t> out;
    put_u32(out, static_cast<std::uint32_t>(examples.size()));
    for (const TaskExample& ex : examples) {
        validate(ex);
        serialize_graph_into(out, ex.input);
        out.push_back(static_cast<std::uint8_t>(ex.target_kind));
        switch (ex.target_kind) {
            case TargetKind::graph_scalar:
                put_f64(out, ex.scalar_target);
                break;
            case TargetKind::node_pointer:
                for (const std::uint32_t p : ex.pointer_target) {
                    put_u32(out, p);
                }
                break;
            case TargetKind::edge_scalar:
                for (const double v : ex.edge_target->data) {
                    put_f64(out, v);
                }
                break;
        }
    }
    write_file_bytes(path, out);
}

std::vector<TaskExample> load_dataset(const std::string& path) {
    const std::vector<std::uint8_t> bytes = read_file_bytes(path);
    ByteReader r{bytes};
    const std::uint32_t count = r.u32();
    std::vector<TaskExample> out;
    out.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        TaskExample ex;
        ex.input = deserialize_graph_from(r);
        const std::uint8_t kind = r.u8();
        if (kind > 2) {
            throw IoError("dataset: unknown target kind " + std::to_string(kind));
        }
        ex.target_kind = static_cast<TargetKind>(kind);
        const std::size_t n = ex.input.num_nodes;
        switch (ex.target_kind) {
            case TargetKind::graph_scalar:
                ex.scalar_target = r.f64();
                break;
            case TargetKind::node_pointer:
                ex.pointer_target.resize(n);
                for (std::uint32_t& p : ex.pointer_target) {
                    p = r.u32();
                }
                break;
            case TargetKind::edge_scalar: {
                std::vector<double> t(n * n);
                for (double& v : t) {
                    v = r.f64();
                }
                ex.edge_target = tensor({n, n}, std::move(t));
                break;
            }
        }
        validate(ex);
        out.push_back(std::move(ex));
    }
    if (r.pos != bytes.size()) {
        throw IoError("dataset: trailing bytes in " + path);
    }
    return out;
}

}  // namespace rt
