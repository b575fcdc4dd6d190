#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rt/config.hpp"
#include "rt/runner.hpp"

namespace {

struct CommonOpts {
    std::string config_path;
    std::string out_dir = "out";
    std::optional<std::uint64_t> seed;
    std::optional<std::string> task;
    std::optional<std::string> model;
    std::optional<std::size_t> layers;
    std::optional<std::string> global_mode;
    std::optional<std::string> ptr_from_edges;
    std::optional<std::size_t> epochs;
    std::optional<std::size_t> train_examples;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--config", o.config_path, "key=value config file");
    cmd->add_option("--out", o.out_dir, "output directory");
    cmd->add_option("--seed", o.seed, "run seed (u64)");
    cmd->add_option("--task", o.task, "lobster | bfs_ptr | fw_step");
    cmd->add_option("--model", o.model, "rt | deepsets | mpnn | transformer");
    cmd->add_option("--layers", o.layers, "number of layers");
    cmd->add_option("--global-mode", o.global_mode, "cat | core");
    cmd->add_option("--ptr-from-edges", o.ptr_from_edges, "true | false");
    cmd->add_option("--epochs", o.epochs, "training epochs");
    cmd->add_option("--train-examples", o.train_examples, "training set size");
}

rt::TrainConfig resolve_config(const CommonOpts& o) {
    rt::TrainConfig cfg;
    if (!o.config_path.empty()) {
        rt::apply_config(cfg, rt::parse_config_file(o.config_path));
    }
    std::map<std::string, std::string> kv;
    if (o.seed) kv["seed"] = std::to_string(*o.seed);
    if (o.task) kv["task"] = *o.task;
    if (o.model) kv["model"] = *o.model;
    if (o.layers) kv["layers"] = std::to_string(*o.layers);
    if (o.global_mode) kv["global_mode"] = *o.global_mode;
    if (o.ptr_from_edges) kv["ptr_from_edges"] = *o.ptr_from_edges;
    if (o.epochs) kv["epochs"] = std::to_string(*o.epochs);
    if (o.train_examples) kv["train_examples"] = std::to_string(*o.train_examples);
    rt::apply_config(cfg, kv);
    rt::resolve_task_widths(cfg);
    return cfg;
}

std::vector<std::size_t> parse_sizes(const std::string& csv) {
    std::vector<std::size_t> out;
    std::size_t pos = 0;
    while (pos < csv.size()) {
        std::size_t comma = csv.find(',', pos);
        if (comma == std::string::npos) {
            comma = csv.size();
        }
        out.push_back(std::stoull(csv.substr(pos, comma - pos)));
        pos = comma + 1;
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Relational transformer: training, verification and benchmarks"};
    app.require_subcommand(1);

    CommonOpts gen_o, train_o, eval_o, verify_o, ablate_o, bench_o;

    CLI::App* gen = app.add_subcommand("gen", "generate a dataset file");
    add_common(gen, gen_o);

    CLI::App* train = app.add_subcommand("train", "train a model, emit metrics + checkpoint");
    add_common(train, train_o);

    CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint");
    add_common(eval, eval_o);
    std::string checkpoint_path;
    eval->add_option("--checkpoint", checkpoint_path, "checkpoint.rtm path")->required();

    CLI::App* verify = app.add_subcommand("verify", "run the property suite");
    add_common(verify, verify_o);

    CLI::App* ablate = app.add_subcommand("ablate", "paired ablation runs");
    add_common(ablate, ablate_o);
    std::string which = "no_edges";
    std::size_t ablate_seeds = 5;
    ablate->add_option("--which", which, "no_edges | no_edge_updates | layers");
    ablate->add_option("--seeds", ablate_seeds, "number of run seeds");

    CLI::App* bench = app.add_subcommand("bench", "forward-pass scaling benchmark");
    add_common(bench, bench_o);
    std::string sizes_csv = "32,64,128,256";
    std::size_t bench_layers = 2;
    bench->add_option("--sizes", sizes_csv, "comma-separated node counts");
    bench->add_option("--bench-layers", bench_layers, "layers in the benchmarked model");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            const rt::TrainConfig cfg = resolve_config(gen_o);
            const auto artifacts = rt::run_gen(cfg, gen_o.out_dir);
            std::printf("wrote %s (hash %s)\n", artifacts[0].path.c_str(),
                        artifacts[0].hash.c_str());
        } else if (train->parsed()) {
            const rt::TrainConfig cfg = resolve_config(train_o);
            const rt::TrainResult res = rt::run_train(cfg, train_o.out_dir);
            std::printf("trained %s/%s: best_epoch=%zu %s test_id=%.6g test_ood=%.6g (%.0f ms)\n",
                        cfg.task.c_str(), rt::model_kind_name(cfg.model.kind).c_str(),
                        res.best_epoch, res.metric_name.c_str(), res.test_id, res.test_ood,
                        res.wall_ms);
        } else if (eval->parsed()) {
            const rt::TrainConfig cfg = resolve_config(eval_o);
            rt::run_eval(checkpoint_path, cfg, eval_o.out_dir);
            std::printf("wrote %s/eval.csv\n", eval_o.out_dir.c_str());
        } else if (verify->parsed()) {
            const std::uint64_t seed = verify_o.seed.value_or(1);
            const auto results = rt::run_verify(seed, verify_o.out_dir);
            int failures = 0;
            for (const auto& r : results) {
                std::printf("%-24s %s  max_err=%.3g  (%s)\n", r.name.c_str(),
                            r.pass ? "pass" : "FAIL", r.max_err, r.detail.c_str());
                failures += r.pass ? 0 : 1;
            }
            if (failures > 0) {
                std::fprintf(stderr, "%d verification check(s) failed\n", failures);
                return 1;
            }
        } else if (ablate->parsed()) {
            rt::TrainConfig base = ablate_o.task && *ablate_o.task != "fw_step"
                                       ? rt::desk_lobster_config()
                                       : rt::desk_fw_config();
            if (!ablate_o.config_path.empty()) {
                base = resolve_config(ablate_o);
            } else {
                CommonOpts o = ablate_o;
                // flag overrides on top of the desk profile
                std::map<std::string, std::string> kv;
                if (o.seed) kv["seed"] = std::to_string(*o.seed);
                if (o.layers) kv["layers"] = std::to_string(*o.layers);
                if (o.epochs) kv["epochs"] = std::to_string(*o.epochs);
                if (o.train_examples) kv["train_examples"] = std::to_string(*o.train_examples);
                rt::apply_config(base, kv);
                rt::resolve_task_widths(base);
            }
            std::vector<std::uint64_t> seeds;
            const std::uint64_t seed0 = ablate_o.seed.value_or(1);
            for (std::size_t i = 0; i < ablate_seeds; ++i) {
                seeds.push_back(seed0 + i);
            }
            const rt::AblateResult res = rt::run_ablate(which, base, seeds, ablate_o.out_dir);
            std::printf("ablate %s on %s: full model wins %zu/%zu (%s, %s better; params %zu vs %zu)\n",
                        res.which.c_str(), base.task.c_str(), res.rt_wins, res.runs.size(),
                        res.metric_name.c_str(), res.higher_is_better ? "higher" : "lower",
                        res.rt_params, res.baseline_params);
        } else if (bench->parsed()) {
            const rt::BenchResult res = rt::run_bench(parse_sizes(sizes_csv), bench_layers,
                                                      bench_o.seed.value_or(1), bench_o.out_dir);
            for (const auto& p : res.points) {
                std::printf("N=%-5zu  %10.3f ms   peak %zu bytes\n", p.n, p.wall_ms,
                            p.peak_bytes);
            }
            std::printf("log-log slope %.3f, max doubling ratio %.3f\n", res.slope,
                        res.max_ratio);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
