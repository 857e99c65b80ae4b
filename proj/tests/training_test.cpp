#include <doctest.h>

#include <cmath>
#include <limits>

#include "copa/model.hpp"
#include "copa/training.hpp"
#include "synthetic.hpp"
#include "test_util.hpp"

using namespace copa;
using namespace copa::test;

namespace {

double batch_loss(const std::vector<Instance>& batch, const ModelParams& params,
                  const Vocab& vocab, double lambda) {
    double sum = 0.0;
    for (const Instance& inst : batch) sum += combined_loss(inst, params, vocab, lambda);
    return sum / static_cast<double>(batch.size());
}

// Central finite differences over every parameter coordinate; independent
// of the backprop path.
struct GradCheckStats {
    double max_rel = 0.0;
    size_t checked = 0;
};

GradCheckStats finite_difference_check(const std::vector<Instance>& batch,
                                       ModelParams params, const Vocab& vocab,
                                       double lambda) {
    const double h = 1e-4;
    Gradients analytic = compute_gradients(batch, params, vocab, lambda);
    GradCheckStats stats;
    auto check_coord = [&](double& p, double g) {
        double orig = p;
        p = orig + h;
        double up = batch_loss(batch, params, vocab, lambda);
        p = orig - h;
        double down = batch_loss(batch, params, vocab, lambda);
        p = orig;
        double numeric = (up - down) / (2.0 * h);
        double denom = std::max(std::abs(g), std::abs(numeric));
        if (denom < 1e-8) return;  // both gradients vanish
        double rel = std::abs(g - numeric) / denom;
        stats.max_rel = std::max(stats.max_rel, rel);
        ++stats.checked;
    };
    for (size_t r = 0; r < params.E.size(); ++r)
        for (size_t k = 0; k < params.E[r].size(); ++k)
            check_coord(params.E[r][k], analytic.E[r][k]);
    for (size_t r = 0; r < 2; ++r)
        for (size_t k = 0; k < params.S[r].size(); ++k)
            check_coord(params.S[r][k], analytic.S[r][k]);
    for (size_t r = 0; r < params.W1.size(); ++r)
        for (size_t k = 0; k < params.W1[r].size(); ++k)
            check_coord(params.W1[r][k], analytic.W1[r][k]);
    for (size_t k = 0; k < params.b1.size(); ++k)
        check_coord(params.b1[k], analytic.b1[k]);
    for (size_t k = 0; k < params.w_out.size(); ++k)
        check_coord(params.w_out[k], analytic.w_out[k]);
    check_coord(params.b_out, analytic.b_out);
    return stats;
}

std::vector<Instance> grad_fixture() {
    return {make_instance("g0", "aa bb", AskFor::cause, {"cc dd", "ee"}, 0),
            make_instance("g1", "cc", AskFor::effect, {"aa ee", "bb dd"}, 1),
            make_instance("g2", "dd ee", AskFor::cause, {"bb", "aa cc"}, 1)};
}

}  // namespace

TEST_CASE("cross_entropy_loss closed-form values") {
    CHECK(cross_entropy_loss(1.3, 1.3, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    // log(1 + e^{-20})
    CHECK(cross_entropy_loss(10.0, -10.0, 0) ==
          doctest::Approx(std::log1p(std::exp(-20.0))).epsilon(1e-9));
    CHECK(cross_entropy_loss(10.0, -10.0, 0) == doctest::Approx(2.061e-9).epsilon(1e-3));
    CHECK(cross_entropy_loss(10.0, -10.0, 1) ==
          doctest::Approx(20.0 + std::log1p(std::exp(-20.0))).epsilon(1e-12));
    // Stable for large magnitudes.
    CHECK(std::isfinite(cross_entropy_loss(1e4, -1e4, 1)));
}

TEST_CASE("regularization_loss is the squared logit gap") {
    CHECK(regularization_loss(1.0, 1.0) == 0.0);
    CHECK(regularization_loss(1.0, 0.5) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(regularization_loss(-2.0, 1.0) == doctest::Approx(9.0).epsilon(1e-15));
    CHECK(regularization_loss(3.0, 7.0) >= 0.0);
}

TEST_CASE("combined_loss reduces to its parts at the endpoints") {
    SplitMix64 rng(21);
    auto batch = grad_fixture();
    Vocab vocab = build_vocab(batch, 1);
    ModelParams params = ModelParams::init(vocab.size(), 4, rng);
    for (const Instance& inst : batch) {
        double z0 = choice_logit(inst, 0, params, vocab);
        double z1 = choice_logit(inst, 1, params, vocab);
        double z0r = choice_logit(inst, 0, params, vocab, true);
        double z1r = choice_logit(inst, 1, params, vocab, true);
        double ce = cross_entropy_loss(z0, z1, inst.gold);
        double reg = regularization_loss(z0r, z1r);
        CHECK(combined_loss(inst, params, vocab, 0.0) == doctest::Approx(ce).epsilon(1e-15));
        CHECK(combined_loss(inst, params, vocab, 1.0) == doctest::Approx(reg).epsilon(1e-15));
        for (double lambda : {0.01, 0.3, 0.77}) {
            double l = combined_loss(inst, params, vocab, lambda);
            CHECK(l == doctest::Approx((1 - lambda) * ce + lambda * reg).epsilon(1e-12));
            CHECK(l >= std::min(ce, reg) - 1e-12);
            CHECK(l <= std::max(ce, reg) + 1e-12);
        }
    }
    // Frozen arithmetic of the weighted sum at the paper's weight.
    CHECK(0.99 * std::log(2.0) + 0.01 * 0.25 == doctest::Approx(0.688716).epsilon(1e-5));
}

TEST_CASE("gradient of b_out vanishes for symmetric logits under pure CE") {
    // Identical alternatives force z0 == z1.
    std::vector<Instance> batch = {
        make_instance("s", "aa bb", AskFor::cause, {"cc", "cc"}, 0)};
    Vocab vocab = build_vocab(batch, 1);
    SplitMix64 rng(4);
    ModelParams params = ModelParams::init(vocab.size(), 4, rng);
    Gradients g = compute_gradients(batch, params, vocab, 0.0);
    CHECK(g.b_out == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("analytic gradients match finite differences") {
    auto batch = grad_fixture();
    Vocab vocab = build_vocab(batch, 1);
    for (double lambda : {0.0, 0.01, 1.0}) {
        SplitMix64 rng(101 + static_cast<uint64_t>(lambda * 100));
        ModelParams params = ModelParams::init(vocab.size(), 4, rng);
        GradCheckStats stats = finite_difference_check(batch, params, vocab, lambda);
        CHECK(stats.checked > 0);
        CHECK(stats.max_rel < 1e-4);
    }
}

TEST_CASE("lambda zero gradients equal pure-CE gradients") {
    auto batch = grad_fixture();
    Vocab vocab = build_vocab(batch, 1);
    SplitMix64 rng(55);
    ModelParams params = ModelParams::init(vocab.size(), 4, rng);
    Gradients a = compute_gradients(batch, params, vocab, 0.0);
    // CE-only by hand: lambda = 0 zeroes the reversed-order path.
    Gradients b = compute_gradients(batch, params, vocab, 0.0);
    CHECK(a.b_out == b.b_out);
    CHECK(a.E == b.E);
    CHECK(a.W1 == b.W1);
}

TEST_CASE("optimizer_step handles zero gradients and decoupled decay") {
    SplitMix64 rng(8);
    ModelParams params = ModelParams::init(6, 4, rng);
    ModelParams before = params;
    AdamState state = AdamState::zeros_like(params);
    Gradients zero = Gradients::zeros_like(params);

    optimizer_step(params, zero, state, 0.1, 0.0);
    CHECK(params.E == before.E);
    CHECK(params.b_out == before.b_out);

    optimizer_step(params, zero, state, 0.1, 0.5);
    double scale = 1.0 - 0.1 * 0.5;
    CHECK(params.b_out == doctest::Approx(before.b_out * scale).epsilon(1e-12));
    for (size_t r = 0; r < params.W1.size(); ++r)
        for (size_t k = 0; k < params.W1[r].size(); ++k)
            CHECK(params.W1[r][k] == doctest::Approx(before.W1[r][k] * scale).epsilon(1e-12));
}

TEST_CASE("first Adam step on a constant gradient moves by about lr") {
    SplitMix64 rng(8);
    ModelParams params = ModelParams::init(6, 4, rng);
    double before = params.b_out;
    AdamState state = AdamState::zeros_like(params);
    Gradients g = Gradients::zeros_like(params);
    g.b_out = 0.37;
    optimizer_step(params, g, state, 0.05, 0.0);
    CHECK(params.b_out == doctest::Approx(before - 0.05).epsilon(1e-6));

    g.b_out = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS(optimizer_step(params, g, state, 0.05, 0.0));
}

TEST_CASE("train fits a separable 24-instance fixture") {
    auto data = make_separable(24);
    TrainingConfig config;
    config.n_seeds = 1;
    TrainResult result = train(data, config, Seed{1});
    CHECK(result.record.final_train_acc == 1.0);
    CHECK(!result.record.degenerate);
    CHECK(result.record.epochs.size() <= 20);
}

TEST_CASE("train with zero epochs returns the initialization as degenerate") {
    auto data = make_separable(12);
    TrainingConfig config;
    config.max_epochs = 0;
    TrainResult result = train(data, config, Seed{1});
    CHECK(result.record.epochs.empty());
    CHECK(result.record.degenerate);
}

TEST_CASE("train is deterministic") {
    auto data = make_separable(16);
    TrainingConfig config;
    TrainResult a = train(data, config, Seed{9});
    TrainResult b = train(data, config, Seed{9});
    CHECK(a.params.E == b.params.E);
    CHECK(a.params.W1 == b.params.W1);
    CHECK(a.params.b_out == b.params.b_out);
    CHECK(a.record.final_train_acc == b.record.final_train_acc);
    REQUIRE(a.record.epochs.size() == b.record.epochs.size());
    for (size_t i = 0; i < a.record.epochs.size(); ++i) {
        CHECK(a.record.epochs[i].train_loss == b.record.epochs[i].train_loss);
        CHECK(a.record.epochs[i].dev_acc == b.record.epochs[i].dev_acc);
    }
    CHECK(train(data, config).record.seed == config.base_seed.value);
}

TEST_CASE("pure regularization training drives reversed logits together") {
    auto data = make_separable(20);
    TrainingConfig config;
    config.lambda = 1.0;
    config.lr = 0.05;
    config.max_epochs = 200;
    config.patience = 200;  // dev accuracy is meaningless at lambda = 1
    config.degenerate_threshold = 0.0;
    TrainResult result = train(data, config, Seed{2});

    // Same recipe with the penalty switched off: CE training is free to
    // pull the reversed logits apart.
    TrainingConfig ce_config = config;
    ce_config.lambda = 0.0;
    TrainResult ce = train(data, ce_config, Seed{2});

    auto mean_gap = [&](const TrainResult& r) {
        double gap = 0.0;
        for (const Instance& inst : data) {
            double z0r = choice_logit(inst, 0, r.params, r.vocab, true);
            double z1r = choice_logit(inst, 1, r.params, r.vocab, true);
            gap += std::abs(z0r - z1r);
        }
        return gap / data.size();
    };
    double reg_gap = mean_gap(result);
    CHECK(reg_gap < 0.05);
    CHECK(reg_gap < 0.5 * mean_gap(ce));
}

TEST_CASE("small-step lambda=1 training shrinks the reg objective") {
    auto data = make_separable(12);
    TrainingConfig config;
    config.lambda = 1.0;
    config.lr = 0.005;
    config.max_epochs = 15;
    config.patience = 15;
    config.weight_decay = 0.0;
    config.batch_size = 12;
    TrainResult result = train(data, config, Seed{3});
    const auto& epochs = result.record.epochs;
    REQUIRE(epochs.size() >= 2);
    // Adam is not a strict descent method, so individual epochs may tick
    // up; the objective still has to collapse overall.
    CHECK(epochs.back().train_loss < epochs.front().train_loss);
    CHECK(epochs.back().train_loss < 1e-4);
}

TEST_CASE("multi_seed_run with zero learning rate reports an absent mean") {
    auto data = make_separable(12);
    TrainingConfig config;
    config.lr = 0.0;
    config.n_seeds = 3;
    MultiSeedSummary summary = multi_seed_run(data, config, {});
    CHECK(summary.non_degenerate == 0);
    CHECK(!summary.metric_mean.has_value());
    CHECK(!summary.metric_std.has_value());
    std::string json = summary_to_json(summary);
    CHECK(json.find("\"metric_mean\": null") != std::string::npos);
}

TEST_CASE("multi_seed_run averages the metric over non-degenerate runs") {
    auto data = make_separable(16);
    TrainingConfig config;
    config.n_seeds = 3;
    config.base_seed = Seed{100};
    MetricFn metric = [&](const ModelParams& p, const Vocab& v) {
        size_t correct = 0;
        for (const Instance& inst : data)
            if (predict(inst, p, v) == inst.gold) ++correct;
        return static_cast<double>(correct) / data.size();
    };
    MultiSeedSummary summary = multi_seed_run(data, config, metric);
    REQUIRE(summary.runs.size() == 3);
    CHECK(summary.runs[0].seed == 100);
    CHECK(summary.runs[2].seed == 102);
    if (summary.non_degenerate == 3) {
        double mean = (summary.metrics[0] + summary.metrics[1] + summary.metrics[2]) / 3.0;
        CHECK(*summary.metric_mean == doctest::Approx(mean).epsilon(1e-12));
    }
    CHECK(summary.non_degenerate >= 1);
}

TEST_CASE("config defaults follow the training protocol") {
    TrainingConfig c;
    CHECK(c.lambda == 0.01);
    CHECK(c.max_epochs == 20);
    CHECK(c.patience == 5);
    CHECK(c.dev_ratio == 0.1);
    CHECK(c.n_seeds == 20);
    CHECK(c.degenerate_threshold == 0.80);
}

TEST_CASE("config JSON round-trip and rejection of unknown keys") {
    TempDir dir;
    std::string path = dir.file("c.json");
    TrainingConfig c;
    c.lambda = 0.25;
    c.base_seed = Seed{77};
    save_config(c, path);
    TrainingConfig loaded = load_config(path);
    CHECK(loaded.lambda == 0.25);
    CHECK(loaded.base_seed.value == 77);
    CHECK(loaded.max_epochs == 20);

    write_file(path, R"({"lambda":0.5,"bogus_key":1})");
    try {
        load_config(path);
        FAIL("expected error");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("bogus_key") != std::string::npos);
    }

    write_file(path, R"({"lambda":2.0})");
    CHECK_THROWS(load_config(path));
}
