#include "rt/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <future>
#include <thread>

#include <json.hpp>

#include "rt/bytes.hpp"
#include "rt/config.hpp"
#include "rt/error.hpp"
#include "rt/tasks.hpp"

namespace rt {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

double now_ms() {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

void ensure_dir(const std::string& out_dir) {
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
    }
}

std::string join_path(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

Artifact write_artifact(const std::string& out_dir, const std::string& name,
                        const std::string& text) {
    const std::string path = join_path(out_dir, name);
    std::vector<std::uint8_t> bytes(text.begin(), text.end());
    write_file_bytes(path, bytes);
    return {name, path, hex64(fnv1a64(bytes))};
}

Artifact write_artifact(const std::string& out_dir, const std::string& name,
                        const std::vector<std::uint8_t>& bytes) {
    const std::string path = join_path(out_dir, name);
    write_file_bytes(path, bytes);
    return {name, path, hex64(fnv1a64(bytes))};
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

}  // namespace

std::string write_manifest(const std::string& out_dir, const std::string& command,
                           const std::string& config_echo_text,
                           const std::vector<Artifact>& artifacts, double wall_ms,
                           const std::string& extra_json) {
    json m;
    m["command"] = command;
    m["config"] = config_echo_text;
    m["wall_ms"] = wall_ms;
    json arts = json::object();
    for (const Artifact& a : artifacts) {
        arts[a.name] = a.hash;
    }
    m["artifacts"] = arts;
    if (!extra_json.empty()) {
        m["extra"] = json::parse(extra_json);
    }
    const std::string text = m.dump(2) + "\n";
    const std::string path = join_path(out_dir, "manifest.json");
    write_file_bytes(path, std::vector<std::uint8_t>(text.begin(), text.end()));
    return path;
}

std::vector<Artifact> run_gen(const TrainConfig& cfg_in, const std::string& out_dir) {
    const double t0 = now_ms();
    TrainConfig cfg = cfg_in;
    resolve_task_widths(cfg);
    ensure_dir(out_dir);
    const std::vector<TaskExample> data = generate_dataset(cfg, "train");
    const std::string path = join_path(out_dir, "dataset.bin");
    save_dataset(path, data);
    Artifact art{"dataset.bin", path, hex64(fnv1a64(read_file_bytes(path)))};
    write_manifest(out_dir, "gen", config_echo(cfg), {art}, now_ms() - t0);
    return {art};
}

TrainResult run_train(const TrainConfig& cfg_in, const std::string& out_dir) {
    TrainConfig cfg = cfg_in;
    resolve_task_widths(cfg);
    ensure_dir(out_dir);
    TrainResult res = train(cfg);
    std::vector<Artifact> artifacts;
    artifacts.push_back(write_artifact(out_dir, "metrics.csv", res.metrics_csv));
    artifacts.push_back(write_artifact(out_dir, "checkpoint.rtm", res.checkpoint));
    artifacts.push_back(write_artifact(out_dir, "resolved.cfg", config_echo(cfg)));
    json extra;
    extra["config_hash"] = res.hash;
    extra["param_count"] = res.param_count;
    extra["best_epoch"] = res.best_epoch;
    extra["test_id"] = res.test_id;
    extra["test_ood"] = res.test_ood;
    extra["metric"] = res.metric_name;
    write_manifest(out_dir, "train", config_echo(cfg), artifacts, res.wall_ms, extra.dump());
    return res;
}

void run_eval(const std::string& checkpoint_path, const TrainConfig& cfg_in,
              const std::string& out_dir) {
    const double t0 = now_ms();
    TrainConfig cfg = cfg_in;
    resolve_task_widths(cfg);
    ensure_dir(out_dir);
    const Model m = load_checkpoint(checkpoint_path);
    const TaskMetric id = evaluate_checkpoint(m, cfg, "eval_id");
    const TaskMetric ood = evaluate_checkpoint(m, cfg, "eval_ood");
    const std::string hash = config_hash(cfg);
    std::string csv = "epoch,split,metric_name,value,wall_ms,config_hash\n";
    csv += "0,eval_id," + id.name + "," + fmt(id.value) + ",0," + hash + "\n";
    csv += "0,eval_ood," + ood.name + "," + fmt(ood.value) + ",0," + hash + "\n";
    std::vector<Artifact> artifacts{write_artifact(out_dir, "eval.csv", csv)};
    write_manifest(out_dir, "eval", config_echo(cfg), artifacts, now_ms() - t0);
}

std::vector<CheckResult> run_verify(std::uint64_t seed, const std::string& out_dir) {
    const double t0 = now_ms();
    ensure_dir(out_dir);
    const std::vector<CheckResult> results = run_verify_suite(seed);
    std::string csv = "check,status,max_err,detail\n";
    for (const CheckResult& r : results) {
        csv += r.name + "," + (r.pass ? "pass" : "FAIL") + "," + fmt(r.max_err) + "," + r.detail +
               "\n";
    }
    std::vector<Artifact> artifacts{write_artifact(out_dir, "verify.csv", csv)};
    write_manifest(out_dir, "verify", "seed=" + std::to_string(seed) + "\n", artifacts,
                   now_ms() - t0);
    return results;
}

std::vector<TrainResult> train_many(const std::vector<TrainConfig>& configs) {
    const std::size_t workers =
        std::max<std::size_t>(1, std::thread::hardware_concurrency());
    std::vector<TrainResult> results(configs.size());
    std::size_t next = 0;
    while (next < configs.size()) {
        const std::size_t batch = std::min(workers, configs.size() - next);
        std::vector<std::future<TrainResult>> futs;
        futs.reserve(batch);
        for (std::size_t b = 0; b < batch; ++b) {
            const TrainConfig& cfg = configs[next + b];
            futs.push_back(std::async(std::launch::async, [&cfg] { return train(cfg); }));
        }
        for (std::size_t b = 0; b < batch; ++b) {
            results[next + b] = futs[b].get();
        }
        next += batch;
    }
    return results;
}

TrainConfig ablated_config(const TrainConfig& base_in, const std::string& which) {
    TrainConfig base = base_in;
    resolve_task_widths(base);
    TrainConfig ab = base;
    if (which == "no_edges") {
        ab.model.kind = ModelKind::transformer;
    } else if (which == "no_edge_updates") {
        ab.model.use_edge_updates = false;
    } else if (which == "layers") {
        ab.model.num_layers = 1;
    } else {
        throw ValueError("ablate: unknown variant '" + which + "'");
    }
    ab.model.normalize();
    if (which != "layers") {
        // matched parameter budget: widen the ablated model's feed-forward
        ab.model = match_param_budget(ab.model, param_count_for(base.model));
    }
    return ab;
}

AblateResult run_ablate(const std::string& which, const TrainConfig& base_in,
                        const std::vector<std::uint64_t>& seeds, const std::string& out_dir) {
    const double t0 = now_ms();
    TrainConfig base = base_in;
    resolve_task_widths(base);
    const TrainConfig ablated = ablated_config(base, which);

    std::vector<TrainConfig> jobs;
    for (const std::uint64_t s : seeds) {
        TrainConfig a = base;
        a.seed = s;
        jobs.push_back(a);
        TrainConfig b = ablated;
        b.seed = s;
        jobs.push_back(b);
    }
    const std::vector<TrainResult> results = train_many(jobs);

    AblateResult out;
    out.which = which;
    out.rt_params = param_count_for(base.model);
    out.baseline_params = param_count_for(ablated.model);
    std::string csv = "variant,seed,metric_name,test_metric,param_count,config_hash\n";
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        const TrainResult& rt = results[2 * i];
        const TrainResult& ab = results[2 * i + 1];
        out.metric_name = rt.metric_name;
        out.higher_is_better = rt.higher_is_better;
        PairedRun run;
        run.seed = seeds[i];
        run.rt_metric = rt.test_id;
        run.baseline_metric = ab.test_id;
        run.rt_wins = rt.higher_is_better ? rt.test_id > ab.test_id : rt.test_id < ab.test_id;
        out.rt_wins += run.rt_wins ? 1 : 0;
        out.runs.push_back(run);
        csv += "full," + std::to_string(seeds[i]) + "," + rt.metric_name + "," +
               fmt(rt.test_id) + "," + std::to_string(rt.param_count) + "," + rt.hash + "\n";
        csv += which + "," + std::to_string(seeds[i]) + "," + ab.metric_name + "," +
               fmt(ab.test_id) + "," + std::to_string(ab.param_count) + "," + ab.hash + "\n";
    }
    out.csv = csv;
    if (!out_dir.empty()) {
        ensure_dir(out_dir);
        std::vector<Artifact> artifacts{write_artifact(out_dir, "ablate.csv", csv)};
        json extra;
        extra["which"] = which;
        extra["rt_wins"] = out.rt_wins;
        extra["seeds"] = seeds.size();
        write_manifest(out_dir, "ablate", config_echo(base), artifacts, now_ms() - t0,
                       extra.dump());
    }
    return out;
}

BenchResult run_bench(const std::vector<std::size_t>& sizes, std::size_t layers,
                      std::uint64_t seed, const std::string& out_dir) {
    const double t0 = now_ms();
    if (sizes.empty()) {
        throw ValueError("bench: no sizes given");
    }
    ModelConfig mc;
    mc.kind = ModelKind::rt;
    mc.target = TargetKind::graph_scalar;
    mc.raw_node_width = 3;
    mc.raw_edge_width = 1;
    mc.num_layers = layers;
    mc.heads = 4;
    mc.head_dim = 8;
    mc.d_n = 32;
    mc.d_e = 16;
    mc.d_nh = 32;
    mc.d_eh1 = 16;
    mc.d_eh2 = 8;
    const Model m = init_model(mc, derive_seed(seed, 0xBE));

    BenchResult out;
    for (const std::size_t n : sizes) {
        Rng rng(derive_seed(seed, n));
        Graph g;
        g.num_nodes = n;
        g.node_feats = uniform_tensor({n, 3}, rng, -1.0, 1.0);
        g.edge_feats = uniform_tensor({n, n, 1}, rng, 0.0, 1.0);
        forward(m, g);  // warmup
        double best = std::numeric_limits<double>::infinity();
        std::size_t peak = 0;
        for (int rep = 0; rep < 5; ++rep) {
            reset_peak_tensor_bytes();
            const double s = now_ms();
            forward(m, g);
            best = std::min(best, now_ms() - s);
            peak = std::max(peak, peak_tensor_bytes());
        }
        out.points.push_back({n, best, peak});
    }

    // least-squares slope of log(time) vs log(N)
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const BenchPoint& p : out.points) {
        const double x = std::log(static_cast<double>(p.n));
        const double y = std::log(p.wall_ms);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double k = static_cast<double>(out.points.size());
    out.slope = (k * sxy - sx * sy) / (k * sxx - sx * sx);
    out.max_ratio = 0.0;
    for (std::size_t i = 0; i + 1 < out.points.size(); ++i) {
        if (out.points[i + 1].n == 2 * out.points[i].n) {
            out.max_ratio =
                std::max(out.max_ratio, out.points[i + 1].wall_ms / out.points[i].wall_ms);
        }
    }

    std::string csv = "n,wall_ms,peak_bytes\n";
    for (const BenchPoint& p : out.points) {
        csv += std::to_string(p.n) + "," + fmt(p.wall_ms) + "," + std::to_string(p.peak_bytes) +
               "\n";
    }
    out.csv = csv;
    if (!out_dir.empty()) {
        ensure_dir(out_dir);
        std::vector<Artifact> artifacts{write_artifact(out_dir, "bench.csv", csv)};
        json extra;
        extra["slope"] = out.slope;
        extra["max_ratio"] = out.max_ratio;
        write_manifest(out_dir, "bench", "seed=" + std::to_string(seed) + "\n", artifacts,
                       now_ms() - t0, extra.dump());
    }
    return out;
}

TrainConfig desk_fw_config() {
    TrainConfig cfg;
    cfg.task = "fw_step";
    cfg.fw_n = 8;
    cfg.train_examples = 2000;
    cfg.eval_examples = 256;
    cfg.epochs = 3;
    cfg.batch_size = 16;
    cfg.learning_rate = 1e-3;
    cfg.model.kind = ModelKind::rt;
    cfg.model.num_layers = 3;
    cfg.model.heads = 2;
    cfg.model.head_dim = 8;
    cfg.model.d_n = 24;
    cfg.model.d_e = 12;
    cfg.model.d_nh = 24;
    cfg.model.d_eh1 = 16;
    cfg.model.d_eh2 = 8;
    cfg.model.ptr_dim = 8;
    resolve_task_widths(cfg);
    return cfg;
}

TrainConfig desk_lobster_config() {
    TrainConfig cfg;
    cfg.task = "lobster";
    cfg.n_min = 4;
    cfg.n_max = 16;
    cfg.ood_size = 32;
    cfg.train_examples = 512;
    cfg.eval_examples = 96;
    cfg.epochs = 18;
    cfg.batch_size = 16;
    cfg.learning_rate = 1e-3;
    cfg.model.kind = ModelKind::rt;
    cfg.model.num_layers = 8;
    cfg.model.heads = 4;
    cfg.model.head_dim = 8;
    cfg.model.d_n = 32;
    cfg.model.d_e = 16;
    cfg.model.d_nh = 32;
    cfg.model.d_eh1 = 16;
    cfg.model.d_eh2 = 8;
    cfg.model.ptr_dim = 8;
    resolve_task_widths(cfg);
    return cfg;
}

TrainConfig desk_bfs_config() {
    TrainConfig cfg = desk_lobster_config();
    cfg.task = "bfs_ptr";
    cfg.model.num_layers = 6;
    cfg.train_examples = 384;
    cfg.epochs = 14;
    cfg.model.ptr_from_edges = true;
    resolve_task_widths(cfg);
    return cfg;
}

}  // namespace rt
