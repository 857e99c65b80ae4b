#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "copa/corpus.hpp"
#include "copa/model.hpp"
#include "copa/rng.hpp"

namespace copa {

struct TrainingConfig {
    double lambda = 0.01;       // weight on the reversed-order penalty
    double lr = 0.01;
    int batch_size = 16;
    int max_epochs = 20;
    int patience = 5;
    double dev_ratio = 0.1;
    double weight_decay = 0.01;
    int embed_dim = 64;
    int min_count = 1;
    double degenerate_threshold = 0.80;
    int n_seeds = 20;
    Seed base_seed{0};

    void check() const;  // throws on out-of-bounds fields
};

TrainingConfig load_config(const std::string& path);
void save_config(const TrainingConfig& config, const std::string& path);

struct EpochStats {
    double train_loss = 0.0;
    double train_acc = 0.0;
    double dev_acc = 0.0;
};

struct RunRecord {
    uint64_t seed = 0;
    std::vector<EpochStats> epochs;
    double final_train_acc = 0.0;  // accuracy of the returned params on the train split
    double best_dev_acc = 0.0;
    bool degenerate = false;       // final_train_acc <= degenerate_threshold
};

struct Gradients {
    Mat E;
    Mat S;
    Mat W1;
    Vec b1;
    Vec w_out;
    double b_out = 0.0;

    static Gradients zeros_like(const ModelParams& params);
};

// -log softmax([z0, z1])[gold], log-sum-exp form.
double cross_entropy_loss(double z0, double z1, int gold);

// (z0r - z1r)^2: penalty on disagreeing reversed-order logits.
double regularization_loss(double z0r, double z1r);

// (1 - lambda) * CE on the normal-order logits + lambda * reg on the
// reversed-order logits of the same two alternatives.
double combined_loss(const Instance& inst, const ModelParams& params, const Vocab& vocab,
                     double lambda);

// Exact analytic gradient of the mean combined loss over the batch.
Gradients compute_gradients(const std::vector<Instance>& batch, const ModelParams& params,
                            const Vocab& vocab, double lambda);

// Adam moments (beta1=0.9, beta2=0.999, eps=1e-8).
struct AdamState {
    Gradients m;
    Gradients v;
    long step = 0;

    static AdamState zeros_like(const ModelParams& params);
};

// Bias-corrected Adam with decoupled weight decay applied before the
// Adam delta. Throws on non-finite gradients.
void optimizer_step(ModelParams& params, const Gradients& grads, AdamState& state,
                    double lr, double weight_decay);

struct TrainResult {
    ModelParams params;
    Vocab vocab;
    RunRecord record;
};

TrainResult train(const std::vector<Instance>& dataset, const TrainingConfig& config,
                  Seed seed);
TrainResult train(const std::vector<Instance>& dataset, const TrainingConfig& config);

// Evaluation metric over a trained model, supplied by the caller of
// multi_seed_run (e.g. test accuracy or challenge accuracy).
using MetricFn = std::function<double(const ModelParams&, const Vocab&)>;

struct MultiSeedSummary {
    std::vector<RunRecord> runs;
    std::vector<double> metrics;  // one per run, aligned with runs
    int non_degenerate = 0;
    std::optional<double> metric_mean;  // absent when every run is degenerate
    std::optional<double> metric_std;
    // Train results kept so callers can pick a representative run.
    std::vector<TrainResult> results;
};

// Runs train with seeds base_seed + 0 .. n_seeds - 1; the mean and
// standard deviation cover non-degenerate runs only.
MultiSeedSummary multi_seed_run(const std::vector<Instance>& dataset,
                                const TrainingConfig& config, const MetricFn& metric);

std::string summary_to_json(const MultiSeedSummary& summary);

}  // namespace copa
