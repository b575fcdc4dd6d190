#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "rt/error.hpp"
#include "rt/tasks.hpp"
#include "rt/train.hpp"

using namespace rt;

namespace {

TrainConfig tiny_config(const std::string& task) {
    TrainConfig cfg;
    cfg.task = task;
    cfg.epochs = 1;
    cfg.batch_size = 4;
    cfg.learning_rate = 1e-3;
    cfg.train_examples = 12;
    cfg.eval_examples = 6;
    cfg.n_min = 4;
    cfg.n_max = 9;
    cfg.ood_size = 10;
    cfg.fw_n = 4;
    cfg.model.kind = ModelKind::rt;
    cfg.model.num_layers = 1;
    cfg.model.heads = 2;
    cfg.model.head_dim = 3;
    cfg.model.d_n = 6;
    cfg.model.d_e = 4;
    cfg.model.d_nh = 6;
    cfg.model.d_eh1 = 4;
    cfg.model.d_eh2 = 3;
    cfg.model.ptr_dim = 4;
    resolve_task_widths(cfg);
    return cfg;
}

}  // namespace

TEST_CASE("loss: perfect scalar prediction gives zero") {
    TrainConfig cfg = tiny_config("lobster");
    Model m = init_model(cfg.model, 1);
    TaskExample ex = gen_lobster({4, 8, 0.5, 0.5, 3});
    // overwrite the target with the model's own prediction
    const ModelOutput out = forward(m, ex.input);
    ex.scalar_target = predict_graph_scalar(m, out)->scalar_value();
    CHECK(example_loss(m, ex)->scalar_value() == doctest::Approx(0.0).epsilon(1e-18));
}

TEST_CASE("loss: uniform pointer logits cost ln N per node") {
    TrainConfig cfg = tiny_config("bfs_ptr");
    Model m = init_model(cfg.model, 1);
    // zero the decoders so every pointer logit is identical
    m.dec_edge_w = zeros(m.dec_edge_w->shape, true);
    m.dec_edge_b = zeros(m.dec_edge_b->shape, true);
    const TaskExample ex = gen_bfs_pointers({4, 5, 0.5, 0.5, 7});
    CHECK(example_loss(m, ex)->scalar_value() ==
          doctest::Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("loss: edge MSE matches a hand loop") {
    TrainConfig cfg = tiny_config("fw_step");
    Model m = init_model(cfg.model, 2);
    const TaskExample ex = gen_fw_step(4, 9);
    const ModelOutput out = forward(m, ex.input);
    const TensorPtr scores = predict_edge_scores(m, out);
    double expect = 0.0;
    for (std::size_t i = 0; i < 16; ++i) {
        const double d = scores->data[i] - ex.edge_target->data[i];
        expect += d * d;
    }
    expect /= 16.0;
    CHECK(example_loss(m, ex)->scalar_value() == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("adam_step: zero gradients leave parameters unchanged") {
    TrainConfig cfg = tiny_config("fw_step");
    Model m = init_model(cfg.model, 3);
    AdamState st = adam_init(m);
    std::vector<double> before;
    m.for_each_param([&before](TensorPtr& t) {
        t->ensure_grad();
        t->zero_grad();
        before.insert(before.end(), t->data.begin(), t->data.end());
    });
    adam_step(m, st, cfg);
    std::vector<double> after;
    m.for_each_param(
        [&after](TensorPtr& t) { after.insert(after.end(), t->data.begin(), t->data.end()); });
    CHECK(before == after);
}

TEST_CASE("adam_step: one step on a scalar reproduces the closed form") {
    TrainConfig cfg = tiny_config("fw_step");
    cfg.learning_rate = 0.1;
    Model m = init_model(cfg.model, 3);
    AdamState st = adam_init(m);
    // drive a single parameter cell with gradient 2
    double expected_delta = 0.0;
    {
        const double g = 2.0;
        const double m1 = (1.0 - cfg.beta1) * g;
        const double m2 = (1.0 - cfg.beta2) * g * g;
        const double mhat = m1 / (1.0 - cfg.beta1);
        const double vhat = m2 / (1.0 - cfg.beta2);
        expected_delta = -cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.eps);
    }
    double before = 0.0;
    m.for_each_param([&](TensorPtr& t) {
        t->ensure_grad();
        t->zero_grad();
    });
    bool first = true;
    m.for_each_param([&](TensorPtr& t) {
        if (first) {
            t->grad[0] = 2.0;
            before = t->data[0];
            first = false;
        }
    });
    adam_step(m, st, cfg);
    first = true;
    m.for_each_param([&](TensorPtr& t) {
        if (first) {
            CHECK(t->data[0] == doctest::Approx(before + expected_delta).epsilon(1e-12));
            first = false;
        }
    });
}

TEST_CASE("adam: ten steps on a quadratic bowl decrease the loss monotonically") {
    // minimize sum((x - c)^2) through the same optimizer machinery
    TrainConfig cfg;
    cfg.learning_rate = 0.05;
    cfg.grad_clip = 1e9;
    const TensorPtr x = tensor({3}, {2.0, -1.5, 0.5}, true);
    const TensorPtr c = tensor({3}, {0.3, 0.1, -0.2});
    std::vector<double> m1(3, 0.0), m2(3, 0.0);
    double prev = 1e300;
    for (std::size_t step = 1; step <= 10; ++step) {
        x->ensure_grad();
        x->zero_grad();
        const TensorPtr diff = sub(x, c);
        const TensorPtr loss = sum(mul(diff, diff));
        backward(loss);
        CHECK(loss->scalar_value() < prev);
        prev = loss->scalar_value();
        const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
        const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
        for (std::size_t i = 0; i < 3; ++i) {
            const double g = x->grad[i];
            m1[i] = cfg.beta1 * m1[i] + (1.0 - cfg.beta1) * g;
            m2[i] = cfg.beta2 * m2[i] + (1.0 - cfg.beta2) * g * g;
            x->data[i] -= cfg.learning_rate * (m1[i] / bc1) / (std::sqrt(m2[i] / bc2) + cfg.eps);
        }
    }
}

TEST_CASE("clip_global_norm: post-clip norm is bounded") {
    TrainConfig cfg = tiny_config("fw_step");
    Model m = init_model(cfg.model, 4);
    Rng rng(5);
    m.for_each_param([&rng](TensorPtr& t) {
        t->ensure_grad();
        for (double& g : t->grad) {
            g = rng.uniform(-3.0, 3.0);
        }
    });
    const double pre = clip_global_norm(m, 1.5);
    CHECK(pre > 1.5);
    double sq = 0.0;
    m.for_each_param([&sq](TensorPtr& t) {
        for (const double g : t->grad) {
            sq += g * g;
        }
    });
    CHECK(std::sqrt(sq) <= 1.5 + 1e-9);
}

TEST_CASE("train: epochs=0 emits an initial checkpoint and no epoch rows") {
    TrainConfig cfg = tiny_config("fw_step");
    cfg.epochs = 0;
    const TrainResult res = train(cfg);
    CHECK(res.epochs.empty());
    CHECK_FALSE(res.checkpoint.empty());
    const Model init = init_model(cfg.model, derive_seed(cfg.seed, 0x696E6974ULL));
    CHECK(res.checkpoint == checkpoint_bytes(init));
}

TEST_CASE("train: tiny runs rerun bit-identically") {
    for (const std::string task : {"lobster", "bfs_ptr", "fw_step"}) {
        TrainConfig cfg = tiny_config(task);
        const TrainResult a = train(cfg);
        const TrainResult b = train(cfg);
        CHECK(a.metrics_csv == b.metrics_csv);
        CHECK(a.checkpoint == b.checkpoint);
        CHECK(a.test_id == b.test_id);
    }
}

TEST_CASE("train: best-checkpoint selection reports the max-validation epoch") {
    TrainConfig cfg = tiny_config("fw_step");
    cfg.epochs = 4;
    const TrainResult res = train(cfg);
    REQUIRE(res.epochs.size() == 4);
    // the reported best must match the optimum over the epoch log
    double best = res.higher_is_better ? -1e300 : 1e300;
    std::size_t best_epoch = 0;
    for (const EpochRecord& r : res.epochs) {
        const bool improves = res.higher_is_better ? r.val_metric > best : r.val_metric < best;
        if (improves) {
            best = r.val_metric;
            best_epoch = r.epoch;
        }
    }
    CHECK(res.best_epoch == best_epoch);
    CHECK(res.best_val == best);
}

TEST_CASE("train: memorization sanity on a handful of fixed examples") {
    TrainConfig cfg = tiny_config("fw_step");
    cfg.train_examples = 5;  // one lands in the validation split
    cfg.epochs = 1500;
    cfg.batch_size = 4;
    cfg.learning_rate = 3e-3;
    cfg.model.num_layers = 2;
    cfg.model.d_n = 12;
    cfg.model.d_e = 8;
    cfg.model.d_nh = 12;
    cfg.model.d_eh1 = 8;
    cfg.model.d_eh2 = 6;
    const TrainResult res = train(cfg);
    CHECK(res.epochs.back().train_loss < 1e-3);
}

TEST_CASE("config echo: round-trips through the parser and hashes stably") {
    TrainConfig cfg = tiny_config("lobster");
    const std::string echo = config_echo(cfg);
    CHECK(config_hash(cfg).size() == 16);
    CHECK(echo.find("task=lobster") != std::string::npos);
    CHECK(config_hash(cfg) == config_hash(cfg));
}
