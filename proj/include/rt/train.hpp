#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rt/graph.hpp"
#include "rt/model.hpp"

namespace rt {

// Everything a run depends on. Serialized verbatim (config_echo) into the
// manifest and hashed into every metric row.
struct TrainConfig {
    std::uint64_t seed = 1;
    std::size_t epochs = 10;
    std::size_t batch_size = 16;
    double learning_rate = 6.3e-5;
    double grad_clip = 128.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::string task = "lobster";  // lobster | bfs_ptr | fw_step
    ModelConfig model;

    std::size_t train_examples = 512;
    std::size_t eval_examples = 128;
    std::size_t n_min = 4;   // lobster-family training range [n_min, n_max)
    std::size_t n_max = 16;
    std::size_t ood_size = 32;
    std::size_t fw_n = 8;
    double p_leg = 0.5;
    double p_foot = 0.5;
};

// Fills in the task-implied model fields (raw feature widths, target kind).
void resolve_task_widths(TrainConfig& cfg);

// Canonical key=value echo (fixed key order); the config hash is FNV-1a over
// this string.
std::string config_echo(const TrainConfig& cfg);
std::string config_hash(const TrainConfig& cfg);

// Generated datasets; split is one of "train", "eval_id", "eval_ood".
// Per-example seeds come from the run seed via the derivation tree.
std::vector<TaskExample> generate_dataset(const TrainConfig& cfg, const std::string& split);

// Task loss: squared error (graph_scalar), pointer cross-entropy
// (node_pointer), mean squared error over pairs (edge_scalar).
TensorPtr example_loss(const Model& m, const TaskExample& ex, Rng* dropout_rng = nullptr);

struct TaskMetric {
    std::string name;
    double value = 0.0;
    bool higher_is_better = false;
};

// Primary evaluation metric per task: mean relative loss (lobster), pointer
// accuracy (bfs_ptr), mean squared error (fw_step).
TaskMetric evaluate(const Model& m, const std::string& task,
                    const std::vector<TaskExample>& data);

struct AdamState {
    std::vector<std::vector<double>> m1;
    std::vector<std::vector<double>> m2;
    std::size_t step = 0;
};

AdamState adam_init(Model& model);

// Scales all parameter gradients so the global norm is at most max_norm;
// returns the pre-clip norm.
double clip_global_norm(Model& model, double max_norm);

// One Adam update with bias correction from the gradients currently on the
// parameters. Gradients are not cleared.
void adam_step(Model& model, AdamState& state, const TrainConfig& cfg);

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_metric = 0.0;
    double grad_norm = 0.0;  // mean pre-clip norm over the epoch's steps
};

struct TrainResult {
    std::string hash;
    std::string metric_name;
    bool higher_is_better = false;
    std::vector<EpochRecord> epochs;
    std::size_t best_epoch = 0;
    double best_val = 0.0;
    double test_id = 0.0;
    double test_ood = 0.0;
    std::size_t param_count = 0;
    std::string metrics_csv;                // deterministic bytes
    std::vector<std::uint8_t> checkpoint;   // best-validation parameters
    double wall_ms = 0.0;                   // measured; manifest only
};

// Deterministic end to end: same config, same bytes. Tracks the
// best-validation epoch and reports test metrics from that checkpoint.
// Aborts with diagnostics if the loss goes non-finite.
TrainResult train(const TrainConfig& cfg);

// Test-set metrics of a trained checkpoint on a config's eval splits.
TaskMetric evaluate_checkpoint(const Model& m, const TrainConfig& cfg, const std::string& split);

}  // namespace rt
