#include "rt/config.hpp"

#include <fstream>
#include <sstream>

#include "rt/error.hpp"

namespace rt {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) {
        ++b;
    }
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) {
        --e;
    }
    return s.substr(b, e - b);
}

std::uint64_t to_u64(const std::string& k, const std::string& v) {
    try {
        std::size_t used = 0;
        const std::uint64_t out = std::stoull(v, &used);
        if (used != v.size()) {
            throw std::invalid_argument(v);
        }
        return out;
    } catch (const std::exception&) {
        throw ValueError("config: " + k + " expects an unsigned integer, got '" + v + "'");
    }
}

double to_f64(const std::string& k, const std::string& v) {
    try {
        std::size_t used = 0;
        const double out = std::stod(v, &used);
        if (used != v.size()) {
            throw std::invalid_argument(v);
        }
        return out;
    } catch (const std::exception&) {
        throw ValueError("config: " + k + " expects a number, got '" + v + "'");
    }
}

bool to_bool(const std::string& k, const std::string& v) {
    if (v == "true" || v == "1") {
        return true;
    }
    if (v == "false" || v == "0") {
        return false;
    }
    throw ValueError("config: " + k + " expects true/false, got '" + v + "'");
}

}  // namespace

std::map<std::string, std::string> parse_config_text(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) {
            line = line.substr(0, hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ValueError("config: line " + std::to_string(lineno) + " is not key=value: '" +
                             line + "'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw ValueError("config: empty key on line " + std::to_string(lineno));
        }
        kv[key] = value;
    }
    return kv;
}

std::map<std::string, std::string> parse_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) {
        throw IoError("cannot open config " + path);
    }
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config_text(ss.str());
}

void apply_config(TrainConfig& cfg, const std::map<std::string, std::string>& kv) {
    for (const auto& [k, v] : kv) {
        if (k == "seed") {
            cfg.seed = to_u64(k, v);
        } else if (k == "epochs") {
            cfg.epochs = to_u64(k, v);
        } else if (k == "batch_size") {
            cfg.batch_size = to_u64(k, v);
        } else if (k == "learning_rate") {
            cfg.learning_rate = to_f64(k, v);
        } else if (k == "grad_clip") {
            cfg.grad_clip = to_f64(k, v);
        } else if (k == "beta1") {
            cfg.beta1 = to_f64(k, v);
        } else if (k == "beta2") {
            cfg.beta2 = to_f64(k, v);
        } else if (k == "eps") {
            cfg.eps = to_f64(k, v);
        } else if (k == "task") {
            cfg.task = v;
        } else if (k == "model") {
            cfg.model.kind = model_kind_from_name(v);
        } else if (k == "layers") {
            cfg.model.num_layers = to_u64(k, v);
        } else if (k == "heads") {
            cfg.model.heads = to_u64(k, v);
        } else if (k == "head_size") {
            cfg.model.head_dim = to_u64(k, v);
        } else if (k == "d_n") {
            cfg.model.d_n = to_u64(k, v);
        } else if (k == "d_e") {
            cfg.model.d_e = to_u64(k, v);
        } else if (k == "d_nh") {
            cfg.model.d_nh = to_u64(k, v);
        } else if (k == "d_eh1") {
            cfg.model.d_eh1 = to_u64(k, v);
        } else if (k == "d_eh2") {
            cfg.model.d_eh2 = to_u64(k, v);
        } else if (k == "ptr_dim") {
            cfg.model.ptr_dim = to_u64(k, v);
        } else if (k == "global_mode") {
            cfg.model.global_mode = global_mode_from_name(v);
        } else if (k == "ptr_from_edges") {
            cfg.model.ptr_from_edges = to_bool(k, v);
        } else if (k == "use_edge_updates") {
            cfg.model.use_edge_updates = to_bool(k, v);
        } else if (k == "dropout_rate") {
            cfg.model.dropout_rate = to_f64(k, v);
        } else if (k == "train_examples") {
            cfg.train_examples = to_u64(k, v);
        } else if (k == "eval_examples") {
            cfg.eval_examples = to_u64(k, v);
        } else if (k == "n_min") {
            cfg.n_min = to_u64(k, v);
        } else if (k == "n_max") {
            cfg.n_max = to_u64(k, v);
        } else if (k == "ood_size") {
            cfg.ood_size = to_u64(k, v);
        } else if (k == "fw_n") {
            cfg.fw_n = to_u64(k, v);
        } else if (k == "p_leg") {
            cfg.p_leg = to_f64(k, v);
        } else if (k == "p_foot") {
            cfg.p_foot = to_f64(k, v);
        } else {
            throw ValueError("config: unknown key '" + k + "'");
        }
    }
}

TrainConfig config_from_file(const std::string& path) {
    TrainConfig cfg;
    apply_config(cfg, parse_config_file(path));
    return cfg;
}

}  // namespace rt
