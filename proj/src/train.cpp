#include "rt/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>

#include "rt/bytes.hpp"
#include "rt/error.hpp"
#include "rt/tasks.hpp"

namespace rt {

namespace {

constexpr std::uint64_t kInitStream = 0x696E6974ULL;    // param init
constexpr std::uint64_t kTrainStream = 0x747261696EULL;
constexpr std::uint64_t kEvalIdStream = 0x6576616CULL;
constexpr std::uint64_t kEvalOodStream = 0x6F6F64ULL;
constexpr std::uint64_t kShuffleStream = 0x73687566ULL;
constexpr std::uint64_t kSplitStream = 0x73706C69ULL;
constexpr std::uint64_t kDropoutStream = 0x64726F70ULL;

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt_metric(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

double now_ms() {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

TaskExample generate_example(const TrainConfig& cfg, const std::string& split,
                             std::uint64_t stream, std::size_t index) {
    const std::uint64_t ex_seed = derive_seed(derive_seed(cfg.seed, stream), index);
    if (cfg.task == "fw_step") {
        return gen_fw_step(split == "eval_ood" ? 2 * cfg.fw_n : cfg.fw_n, ex_seed);
    }
    LobsterSpec spec;
    spec.p_leg = cfg.p_leg;
    spec.p_foot = cfg.p_foot;
    spec.seed = ex_seed;
    if (split == "eval_ood") {
        spec.n_min = cfg.ood_size;
        spec.n_max = cfg.ood_size + 1;
    } else {
        spec.n_min = cfg.n_min;
        spec.n_max = cfg.n_max;
    }
    if (cfg.task == "lobster") {
        return gen_lobster(spec);
    }
    if (cfg.task == "bfs_ptr") {
        return gen_bfs_pointers(spec);
    }
    throw ValueError("unknown task '" + cfg.task + "'");
}

bool better(double a, double b, bool higher_is_better) {
    return higher_is_better ? a > b : a < b;
}

std::vector<std::vector<double>> snapshot_params(Model& m) {
    std::vector<std::vector<double>> out;
    m.for_each_param([&out](TensorPtr& t) { out.push_back(t->data); });
    return out;
}

void restore_params(Model& m, const std::vector<std::vector<double>>& snap) {
    std::size_t i = 0;
    m.for_each_param([&snap, &i](TensorPtr& t) { t->data = snap[i++]; });
}

}  // namespace

void resolve_task_widths(TrainConfig& cfg) {
    if (cfg.task == "lobster") {
        cfg.model.raw_node_width = 3;
        cfg.model.raw_edge_width = 1;
        cfg.model.raw_global_width = 0;
        cfg.model.target = TargetKind::graph_scalar;
    } else if (cfg.task == "bfs_ptr") {
        cfg.model.raw_node_width = 3;
        cfg.model.raw_edge_width = 1;
        cfg.model.raw_global_width = 0;
        cfg.model.target = TargetKind::node_pointer;
    } else if (cfg.task == "fw_step") {
        cfg.model.raw_node_width = 1;
        cfg.model.raw_edge_width = 1;
        cfg.model.raw_global_width = 0;
        cfg.model.target = TargetKind::edge_scalar;
    } else {
        throw ValueError("unknown task '" + cfg.task + "'");
    }
    cfg.model.normalize();
}

std::string config_echo(const TrainConfig& cfg) {
    std::string s;
    auto kv = [&s](const std::string& k, const std::string& v) { s += k + "=" + v + "\n"; };
    kv("seed", std::to_string(cfg.seed));
    kv("epochs", std::to_string(cfg.epochs));
    kv("batch_size", std::to_string(cfg.batch_size));
    kv("learning_rate", fmt_double(cfg.learning_rate));
    kv("grad_clip", fmt_double(cfg.grad_clip));
    kv("beta1", fmt_double(cfg.beta1));
    kv("beta2", fmt_double(cfg.beta2));
    kv("eps", fmt_double(cfg.eps));
    kv("task", cfg.task);
    kv("model", model_kind_name(cfg.model.kind));
    kv("layers", std::to_string(cfg.model.num_layers));
    kv("heads", std::to_string(cfg.model.heads));
    kv("head_size", std::to_string(cfg.model.head_dim));
    kv("d_n", std::to_string(cfg.model.d_n));
    kv("d_e", std::to_string(cfg.model.d_e));
    kv("d_nh", std::to_string(cfg.model.d_nh));
    kv("d_eh1", std::to_string(cfg.model.d_eh1));
    kv("d_eh2", std::to_string(cfg.model.d_eh2));
    kv("ptr_dim", std::to_string(cfg.model.ptr_dim));
    kv("global_mode", global_mode_name(cfg.model.global_mode));
    kv("ptr_from_edges", cfg.model.ptr_from_edges ? "true" : "false");
    kv("use_edge_updates", cfg.model.use_edge_updates ? "true" : "false");
    kv("dropout_rate", fmt_double(cfg.model.dropout_rate));
    kv("train_examples", std::to_string(cfg.train_examples));
    kv("eval_examples", std::to_string(cfg.eval_examples));
    kv("n_min", std::to_string(cfg.n_min));
    kv("n_max", std::to_string(cfg.n_max));
    kv("ood_size", std::to_string(cfg.ood_size));
    kv("fw_n", std::to_string(cfg.fw_n));
    kv("p_leg", fmt_double(cfg.p_leg));
    kv("p_foot", fmt_double(cfg.p_foot));
    return s;
}

std::string config_hash(const TrainConfig& cfg) { return hex64(fnv1a64(config_echo(cfg))); }

std::vector<TaskExample> generate_dataset(const TrainConfig& cfg, const std::string& split) {
    std::uint64_t stream;
    std::size_t count;
    if (split == "train") {
        stream = kTrainStream;
        count = cfg.train_examples;
    } else if (split == "eval_id") {
        stream = kEvalIdStream;
        count = cfg.eval_examples;
    } else if (split == "eval_ood") {
        stream = kEvalOodStream;
        count = cfg.eval_examples;
    } else {
        throw ValueError("unknown split '" + split + "'");
    }
    std::vector<TaskExample> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        out.push_back(generate_example(cfg, split, stream, i));
    }
    return out;
}

TensorPtr example_loss(const Model& m, const TaskExample& ex, Rng* dropout_rng) {
    const ModelOutput out = forward(m, ex.input, dropout_rng);
    switch (ex.target_kind) {
        case TargetKind::graph_scalar: {
            TensorPtr diff =
                sub(predict_graph_scalar(m, out), scalar_tensor(ex.scalar_target));
            return mul(diff, diff);
        }
        case TargetKind::node_pointer: {
            TensorPtr logits =
                predict_pointer_logits(m, out, m.cfg.decodes_from_edges());
            return cross_entropy_rows(logits, ex.pointer_target);
        }
        case TargetKind::edge_scalar: {
            TensorPtr diff = sub(predict_edge_scores(m, out), ex.edge_target);
            return mean(mul(diff, diff));
        }
    }
    throw ValueError("example_loss: unknown target kind");
}

TaskMetric evaluate(const Model& m, const std::string& task,
                    const std::vector<TaskExample>& data) {
    if (data.empty()) {
        throw ValueError("evaluate: empty dataset");
    }
    double acc = 0.0;
    for (const TaskExample& ex : data) {
        const ModelOutput out = forward(m, ex.input);
        if (task == "lobster") {
            acc += relative_loss(ex.scalar_target,
                                 predict_graph_scalar(m, out)->scalar_value());
        } else if (task == "bfs_ptr") {
            const TensorPtr logits =
                predict_pointer_logits(m, out, m.cfg.decodes_from_edges());
            acc += pointer_score(argmax_rows(*logits), ex.pointer_target);
        } else if (task == "fw_step") {
            TensorPtr diff = sub(predict_edge_scores(m, out), ex.edge_target);
            acc += mean(mul(diff, diff))->scalar_value();
        } else {
            throw ValueError("evaluate: unknown task '" + task + "'");
        }
    }
    const double value = acc / static_cast<double>(data.size());
    if (task == "lobster") {
        return {"relative_loss", value, false};
    }
    if (task == "bfs_ptr") {
        return {"pointer_accuracy", value, true};
    }
    return {"mse", value, false};
}

AdamState adam_init(Model& model) {
    AdamState st;
    model.for_each_param([&st](TensorPtr& t) {
        st.m1.emplace_back(t->size(), 0.0);
        st.m2.emplace_back(t->size(), 0.0);
    });
    return st;
}

double clip_global_norm(Model& model, double max_norm) {
    double sq = 0.0;
    model.for_each_param([&sq](TensorPtr& t) {
        for (const double g : t->grad) {
            sq += g * g;
        }
    });
    const double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
        const double scale = max_norm / norm;
        model.for_each_param([scale](TensorPtr& t) {
            for (double& g : t->grad) {
                g *= scale;
            }
        });
    }
    return norm;
}

void adam_step(Model& model, AdamState& state, const TrainConfig& cfg) {
    ++state.step;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    std::size_t idx = 0;
    model.for_each_param([&](TensorPtr& t) {
        t->ensure_grad();
        std::vector<double>& m1 = state.m1[idx];
        std::vector<double>& m2 = state.m2[idx];
        ++idx;
        for (std::size_t i = 0; i < t->size(); ++i) {
            const double g = t->grad[i];
            m1[i] = cfg.beta1 * m1[i] + (1.0 - cfg.beta1) * g;
            m2[i] = cfg.beta2 * m2[i] + (1.0 - cfg.beta2) * g * g;
            const double mhat = m1[i] / bc1;
            const double vhat = m2[i] / bc2;
            t->data[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    });
}

TaskMetric evaluate_checkpoint(const Model& m, const TrainConfig& cfg, const std::string& split) {
    return evaluate(m, cfg.task, generate_dataset(cfg, split));
}

TrainResult train(const TrainConfig& cfg_in) {
    TrainConfig cfg = cfg_in;
    resolve_task_widths(cfg);
    const double t0 = now_ms();

    TrainResult res;
    res.hash = config_hash(cfg);

    Model model = init_model(cfg.model, derive_seed(cfg.seed, kInitStream));
    res.param_count = model.param_count();
    AdamState adam = adam_init(model);

    const std::vector<TaskExample> all_train = generate_dataset(cfg, "train");
    // seed-stable 10% validation partition
    std::vector<std::size_t> train_idx, val_idx;
    const std::uint64_t split_seed = derive_seed(cfg.seed, kSplitStream);
    for (std::size_t i = 0; i < all_train.size(); ++i) {
        if (derive_seed(split_seed, i) % 10 == 0) {
            val_idx.push_back(i);
        } else {
            train_idx.push_back(i);
        }
    }
    if (val_idx.empty() && !all_train.empty()) {
        val_idx.push_back(train_idx.back());
        train_idx.pop_back();
    }
    std::vector<TaskExample> val_set;
    for (const std::size_t i : val_idx) {
        val_set.push_back(all_train[i]);
    }

    Rng dropout_rng(derive_seed(cfg.seed, kDropoutStream));
    Rng* drop = cfg.model.dropout_rate > 0.0 ? &dropout_rng : nullptr;

    std::string csv = "epoch,split,metric_name,value,wall_ms,config_hash\n";
    auto row = [&csv, &res](std::size_t epoch, const std::string& split,
                            const std::string& name, double value) {
        csv += std::to_string(epoch) + "," + split + "," + name + "," + fmt_metric(value) +
               ",0," + res.hash + "\n";
    };

    std::vector<std::vector<double>> best_params = snapshot_params(model);
    TaskMetric best{"", 0.0, false};
    bool have_best = false;
    double last_grad_norm = 0.0;

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::vector<std::size_t> order = train_idx;
        Rng shuffle_rng(derive_seed(derive_seed(cfg.seed, kShuffleStream), epoch));
        shuffle_rng.shuffle(order);

        double loss_sum = 0.0;
        double norm_sum = 0.0;
        std::size_t steps = 0;
        std::size_t pos = 0;
        while (pos < order.size()) {
            const std::size_t batch =
                std::min(cfg.batch_size, order.size() - pos);
            model.for_each_param([](TensorPtr& t) {
                t->ensure_grad();
                t->zero_grad();
            });
            for (std::size_t b = 0; b < batch; ++b) {
                const TaskExample& ex = all_train[order[pos + b]];
                TensorPtr loss = example_loss(model, ex, drop);
                const double lv = loss->scalar_value();
                if (!std::isfinite(lv)) {
                    throw ValueError("train: non-finite loss at epoch " + std::to_string(epoch) +
                                     ", step " + std::to_string(steps) +
                                     "; last gradient norm " + fmt_double(last_grad_norm));
                }
                loss_sum += lv;
                backward(scale(loss, 1.0 / static_cast<double>(batch)));
            }
            last_grad_norm = clip_global_norm(model, cfg.grad_clip);
            norm_sum += last_grad_norm;
            adam_step(model, adam, cfg);
            ++steps;
            pos += batch;
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = order.empty() ? 0.0 : loss_sum / static_cast<double>(order.size());
        rec.grad_norm = steps == 0 ? 0.0 : norm_sum / static_cast<double>(steps);
        const TaskMetric val = evaluate(model, cfg.task, val_set);
        rec.val_metric = val.value;
        res.metric_name = val.name;
        res.higher_is_better = val.higher_is_better;
        res.epochs.push_back(rec);

        row(epoch, "train", "loss", rec.train_loss);
        row(epoch, "train", "grad_norm", rec.grad_norm);
        row(epoch, "val", val.name, val.value);

        if (!have_best || better(val.value, best.value, val.higher_is_better)) {
            have_best = true;
            best = val;
            best_params = snapshot_params(model);
            res.best_epoch = epoch;
        }
    }

    restore_params(model, best_params);
    res.best_val = best.value;
    const TaskMetric id = evaluate_checkpoint(model, cfg, "eval_id");
    const TaskMetric ood = evaluate_checkpoint(model, cfg, "eval_ood");
    res.metric_name = id.name;
    res.higher_is_better = id.higher_is_better;
    res.test_id = id.value;
    res.test_ood = ood.value;
    row(res.best_epoch, "test_id", id.name, id.value);
    row(res.best_epoch, "test_ood", ood.name, ood.value);

    res.metrics_csv = std::move(csv);
    res.checkpoint = checkpoint_bytes(model);
    res.wall_ms = now_ms() - t0;
    return res;
}

}  // namespace rt
