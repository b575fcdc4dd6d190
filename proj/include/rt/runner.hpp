#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rt/train.hpp"
#include "rt/verify.hpp"

namespace rt {

// Command implementations behind the CLI. Every command writes its artifacts
// plus a manifest.json holding the command name, the resolved config echo,
// artifact hashes, and measured timing. Measured time lives only in the
// manifest; all other artifacts are byte-deterministic.

struct Artifact {
    std::string name;
    std::string path;
    std::string hash;
};

std::string write_manifest(const std::string& out_dir, const std::string& command,
                           const std::string& config_echo_text,
                           const std::vector<Artifact>& artifacts, double wall_ms,
                           const std::string& extra_json = "");

// gen: writes dataset.bin (the config's train split) and its manifest.
std::vector<Artifact> run_gen(const TrainConfig& cfg, const std::string& out_dir);

// train: metrics.csv + checkpoint.rtm + resolved.cfg + manifest.json.
TrainResult run_train(const TrainConfig& cfg, const std::string& out_dir);

// eval: evaluates a checkpoint on the config's eval splits -> eval.csv.
void run_eval(const std::string& checkpoint_path, const TrainConfig& cfg,
              const std::string& out_dir);

// verify: property suite -> verify.csv; returns the results.
std::vector<CheckResult> run_verify(std::uint64_t seed, const std::string& out_dir);

// ---- ablations --------------------------------------------------------------

struct PairedRun {
    std::uint64_t seed = 0;
    double baseline_metric = 0.0;  // ablated variant
    double rt_metric = 0.0;        // full model
    bool rt_wins = false;
};

struct AblateResult {
    std::string which;
    std::string metric_name;
    bool higher_is_better = false;
    std::vector<PairedRun> runs;
    std::size_t rt_wins = 0;
    std::string csv;
    std::size_t rt_params = 0;
    std::size_t baseline_params = 0;
};

// which ∈ {no_edges, no_edge_updates, layers}. Trains matched-budget pairs
// over `seeds` run seeds and reports the per-seed comparison.
AblateResult run_ablate(const std::string& which, const TrainConfig& base,
                        const std::vector<std::uint64_t>& seeds, const std::string& out_dir);

// ---- scaling benchmark ------------------------------------------------------

struct BenchPoint {
    std::size_t n = 0;
    double wall_ms = 0.0;
    std::size_t peak_bytes = 0;
};

struct BenchResult {
    std::vector<BenchPoint> points;
    double slope = 0.0;       // log-log fit of time vs N
    double max_ratio = 0.0;   // worst time(2N)/time(N) over consecutive doublings
    std::string csv;
};

BenchResult run_bench(const std::vector<std::size_t>& sizes, std::size_t layers,
                      std::uint64_t seed, const std::string& out_dir);

// Trains several configs, fanning out across hardware threads. Results are
// independent of scheduling; order matches the input.
std::vector<TrainResult> train_many(const std::vector<TrainConfig>& configs);

// ---- desk-scale experiment profiles ----------------------------------------
// Small, pinned configurations sized so the directional experiments finish at
// desk scale. The paper-scale defaults stay in TrainConfig/ModelConfig.

TrainConfig desk_fw_config();       // fw_step, n=8, 2000 examples
TrainConfig desk_lobster_config();  // lobster [4,16) -> size-32 eval, 8 layers
TrainConfig desk_bfs_config();      // bfs_ptr [4,16) -> size-32 eval

// The matched-parameter ablated counterpart of a config.
TrainConfig ablated_config(const TrainConfig& base, const std::string& which);

}  // namespace rt
