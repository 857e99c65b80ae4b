#include "copa/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "copa/transforms.hpp"

namespace copa {

using json = nlohmann::ordered_json;

void TrainingConfig::check() const {
    if (lambda < 0.0 || lambda > 1.0) throw std::runtime_error("config: lambda must be in [0,1]");
    if (lr < 0.0) throw std::runtime_error("config: lr must be >= 0");
    if (batch_size < 1) throw std::runtime_error("config: batch_size must be positive");
    if (max_epochs < 0) throw std::runtime_error("config: max_epochs must be >= 0");
    if (patience < 1) throw std::runtime_error("config: patience must be >= 1");
    if (dev_ratio <= 0.0 || dev_ratio >= 1.0) {
        throw std::runtime_error("config: dev_ratio must be in (0,1)");
    }
    if (weight_decay < 0.0) throw std::runtime_error("config: weight_decay must be >= 0");
    if (embed_dim < 1) throw std::runtime_error("config: embed_dim must be positive");
    if (min_count < 1) throw std::runtime_error("config: min_count must be >= 1");
    if (degenerate_threshold < 0.0 || degenerate_threshold > 1.0) {
        throw std::runtime_error("config: degenerate_threshold must be in [0,1]");
    }
    if (n_seeds < 1) throw std::runtime_error("config: n_seeds must be >= 1");
}

TrainingConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    json obj;
    try {
        obj = json::parse(in);
    } catch (const json::parse_error& e) {
        throw std::runtime_error("config file " + path + ": malformed JSON: " + e.what());
    }
    TrainingConfig c;
    auto get = [&](const char* key, auto& field) {
        if (!obj.contains(key)) return;
        try {
            field = obj[key].get<std::decay_t<decltype(field)>>();
        } catch (const json::exception&) {
            throw std::runtime_error("config file " + path + ": bad value for key \"" +
                                     key + "\"");
        }
    };
    get("lambda", c.lambda);
    get("lr", c.lr);
    get("batch_size", c.batch_size);
    get("max_epochs", c.max_epochs);
    get("patience", c.patience);
    get("dev_ratio", c.dev_ratio);
    get("weight_decay", c.weight_decay);
    get("embed_dim", c.embed_dim);
    get("min_count", c.min_count);
    get("degenerate_threshold", c.degenerate_threshold);
    get("n_seeds", c.n_seeds);
    get("base_seed", c.base_seed.value);
    for (const auto& [key, value] : obj.items()) {
        static const char* known[] = {"lambda", "lr", "batch_size", "max_epochs",
                                      "patience", "dev_ratio", "weight_decay", "embed_dim",
                                      "min_count", "degenerate_threshold", "n_seeds",
                                      "base_seed"};
        if (std::find_if(std::begin(known), std::end(known),
                         [&](const char* k) { return key == k; }) == std::end(known)) {
            throw std::runtime_error("config file " + path + ": unknown key \"" + key + "\"");
        }
    }
    c.check();
    return c;
}

void save_config(const TrainingConfig& c, const std::string& path) {
    json obj;
    obj["lambda"] = c.lambda;
    obj["lr"] = c.lr;
    obj["batch_size"] = c.batch_size;
    obj["max_epochs"] = c.max_epochs;
    obj["patience"] = c.patience;
    obj["dev_ratio"] = c.dev_ratio;
    obj["weight_decay"] = c.weight_decay;
    obj["embed_dim"] = c.embed_dim;
    obj["min_count"] = c.min_count;
    obj["degenerate_threshold"] = c.degenerate_threshold;
    obj["n_seeds"] = c.n_seeds;
    obj["base_seed"] = c.base_seed.value;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write config file: " + path);
    out << obj.dump(2) << "\n";
}

Gradients Gradients::zeros_like(const ModelParams& p) {
    Gradients g;
    g.E.assign(p.E.size(), Vec(p.d, 0.0));
    g.S.assign(2, Vec(p.d, 0.0));
    g.W1.assign(p.d, Vec(p.d, 0.0));
    g.b1.assign(p.d, 0.0);
    g.w_out.assign(p.d, 0.0);
    g.b_out = 0.0;
    return g;
}

double cross_entropy_loss(double z0, double z1, int gold) {
    double m = std::max(z0, z1);
    double lse = m + std::log(std::exp(z0 - m) + std::exp(z1 - m));
    return lse - (gold == 0 ? z0 : z1);
}

double regularization_loss(double z0r, double z1r) {
    double diff = z0r - z1r;
    return diff * diff;
}

namespace {

struct InstanceForward {
    ForwardCache c0, c1, c0r, c1r;
    double z0, z1, z0r, z1r;
};

InstanceForward forward_instance(const Instance& inst, const ModelParams& params,
                                 const Vocab& vocab) {
    if (inst.alternatives.size() != 2) {
        throw std::runtime_error("training loss requires a binary instance, got \"" +
                                 inst.id + "\"");
    }
    InstanceForward f;
    for (int i = 0; i < 2; ++i) {
        auto [cause_text, effect_text] = arrange_inputs(inst, i);
        ForwardCache normal = encode_pair_cached(cause_text, effect_text, params, vocab);
        ForwardCache reversed = encode_pair_cached(effect_text, cause_text, params, vocab);
        double zn = score(normal.h, params);
        double zr = score(reversed.h, params);
        if (i == 0) {
            f.c0 = std::move(normal);
            f.c0r = std::move(reversed);
            f.z0 = zn;
            f.z0r = zr;
        } else {
            f.c1 = std::move(normal);
            f.c1r = std::move(reversed);
            f.z1 = zn;
            f.z1r = zr;
        }
    }
    return f;
}

// Accumulates d(loss)/d(params) through one encoded pair given d(loss)/dz.
void backprop_pair(const ForwardCache& cache, double gz, const ModelParams& params,
                   Gradients& grads) {
    int d = params.d;
    grads.b_out += gz;
    Vec gpre(d);
    for (int r = 0; r < d; ++r) {
        grads.w_out[r] += gz * cache.h[r];
        double gh = gz * params.w_out[r];
        gpre[r] = cache.pre_activation[r] > 0.0 ? gh : 0.0;
    }
    Vec gmean(d, 0.0);
    for (int r = 0; r < d; ++r) {
        if (gpre[r] == 0.0) continue;
        grads.b1[r] += gpre[r];
        Vec& grow = grads.W1[r];
        const Vec& row = params.W1[r];
        for (int k = 0; k < d; ++k) {
            grow[k] += gpre[r] * cache.meanpool[k];
            gmean[k] += gpre[r] * row[k];
        }
    }
    double inv_n = 1.0 / static_cast<double>(cache.token_ids.size());
    for (size_t t = 0; t < cache.token_ids.size(); ++t) {
        Vec& ge = grads.E[cache.token_ids[t]];
        Vec& gs = grads.S[cache.segments[t]];
        for (int k = 0; k < d; ++k) {
            double g = gmean[k] * inv_n;
            ge[k] += g;
            gs[k] += g;
        }
    }
}

}  // namespace

double combined_loss(const Instance& inst, const ModelParams& params, const Vocab& vocab,
                     double lambda) {
    InstanceForward f = forward_instance(inst, params, vocab);
    double ce = cross_entropy_loss(f.z0, f.z1, inst.gold);
    double reg = regularization_loss(f.z0r, f.z1r);
    return (1.0 - lambda) * ce + lambda * reg;
}

Gradients compute_gradients(const std::vector<Instance>& batch, const ModelParams& params,
                            const Vocab& vocab, double lambda) {
    if (batch.empty()) throw std::runtime_error("compute_gradients: empty batch");
    Gradients grads = Gradients::zeros_like(params);
    for (const Instance& inst : batch) {
        InstanceForward f = forward_instance(inst, params, vocab);
        double m = std::max(f.z0, f.z1);
        double e0 = std::exp(f.z0 - m);
        double e1 = std::exp(f.z1 - m);
        double p0 = e0 / (e0 + e1);
        double p1 = 1.0 - p0;
        double gz0 = (1.0 - lambda) * (p0 - (inst.gold == 0 ? 1.0 : 0.0));
        double gz1 = (1.0 - lambda) * (p1 - (inst.gold == 1 ? 1.0 : 0.0));
        double diff = f.z0r - f.z1r;
        double gz0r = 2.0 * lambda * diff;
        double gz1r = -2.0 * lambda * diff;
        backprop_pair(f.c0, gz0, params, grads);
        backprop_pair(f.c1, gz1, params, grads);
        backprop_pair(f.c0r, gz0r, params, grads);
        backprop_pair(f.c1r, gz1r, params, grads);
    }
    double inv = 1.0 / static_cast<double>(batch.size());
    for (auto& row : grads.E)
        for (double& x : row) x *= inv;
    for (auto& row : grads.S)
        for (double& x : row) x *= inv;
    for (auto& row : grads.W1)
        for (double& x : row) x *= inv;
    for (double& x : grads.b1) x *= inv;
    for (double& x : grads.w_out) x *= inv;
    grads.b_out *= inv;
    return grads;
}

AdamState AdamState::zeros_like(const ModelParams& params) {
    AdamState s;
    s.m = Gradients::zeros_like(params);
    s.v = Gradients::zeros_like(params);
    s.step = 0;
    return s;
}

namespace {

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kEps = 1e-8;

void adam_update(double& p, double g, double& m, double& v, double lr, double wd,
                 double bc1, double bc2) {
    if (!std::isfinite(g)) throw std::runtime_error("optimizer_step: non-finite gradient");
    p -= lr * wd * p;  // decoupled weight decay, applied before the Adam delta
    m = kBeta1 * m + (1.0 - kBeta1) * g;
    v = kBeta2 * v + (1.0 - kBeta2) * g * g;
    double mhat = m / bc1;
    double vhat = v / bc2;
    p -= lr * mhat / (std::sqrt(vhat) + kEps);
}

void adam_update_mat(Mat& p, const Mat& g, Mat& m, Mat& v, double lr, double wd,
                     double bc1, double bc2) {
    for (size_t r = 0; r < p.size(); ++r)
        for (size_t k = 0; k < p[r].size(); ++k)
            adam_update(p[r][k], g[r][k], m[r][k], v[r][k], lr, wd, bc1, bc2);
}

void adam_update_vec(Vec& p, const Vec& g, Vec& m, Vec& v, double lr, double wd,
                     double bc1, double bc2) {
    for (size_t k = 0; k < p.size(); ++k)
        adam_update(p[k], g[k], m[k], v[k], lr, wd, bc1, bc2);
}

}  // namespace

void optimizer_step(ModelParams& params, const Gradients& grads, AdamState& state,
                    double lr, double weight_decay) {
    ++state.step;
    double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(state.step));
    double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(state.step));
    adam_update_mat(params.E, grads.E, state.m.E, state.v.E, lr, weight_decay, bc1, bc2);
    adam_update_mat(params.S, grads.S, state.m.S, state.v.S, lr, weight_decay, bc1, bc2);
    adam_update_mat(params.W1, grads.W1, state.m.W1, state.v.W1, lr, weight_decay, bc1, bc2);
    adam_update_vec(params.b1, grads.b1, state.m.b1, state.v.b1, lr, weight_decay, bc1, bc2);
    adam_update_vec(params.w_out, grads.w_out, state.m.w_out, state.v.w_out, lr,
                    weight_decay, bc1, bc2);
    adam_update(params.b_out, grads.b_out, state.m.b_out, state.v.b_out, lr, weight_decay,
                bc1, bc2);
}

namespace {

double split_accuracy(const std::vector<Instance>& set, const ModelParams& params,
                      const Vocab& vocab) {
    if (set.empty()) return 0.0;
    size_t correct = 0;
    for (const Instance& inst : set)
        if (predict(inst, params, vocab) == inst.gold) ++correct;
    return static_cast<double>(correct) / static_cast<double>(set.size());
}

double mean_loss(const std::vector<Instance>& set, const ModelParams& params,
                 const Vocab& vocab, double lambda) {
    double sum = 0.0;
    for (const Instance& inst : set) sum += combined_loss(inst, params, vocab, lambda);
    return sum / static_cast<double>(set.size());
}

}  // namespace

TrainResult train(const std::vector<Instance>& dataset, const TrainingConfig& config,
                  Seed seed) {
    config.check();
    if (dataset.size() < 10) throw std::runtime_error("train: need at least 10 instances");

    auto [train_set, dev_set] = split_train_dev(dataset, config.dev_ratio, seed);
    Vocab vocab = build_vocab(train_set, config.min_count);
    SplitMix64 rng(seed.value);
    ModelParams params = ModelParams::init(vocab.size(), config.embed_dim, rng);
    AdamState state = AdamState::zeros_like(params);

    RunRecord record;
    record.seed = seed.value;

    ModelParams best = params;
    double best_dev = split_accuracy(dev_set, params, vocab);
    int stale_epochs = 0;
    bool diverged = false;

    std::vector<size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), size_t{0});

    for (int epoch = 0; epoch < config.max_epochs && !diverged; ++epoch) {
        shuffle(order, rng);
        for (size_t start = 0; start < order.size(); start += config.batch_size) {
            size_t end = std::min(order.size(), start + config.batch_size);
            std::vector<Instance> batch;
            batch.reserve(end - start);
            for (size_t i = start; i < end; ++i) batch.push_back(train_set[order[i]]);
            Gradients grads = compute_gradients(batch, params, vocab, config.lambda);
            try {
                optimizer_step(params, grads, state, config.lr, config.weight_decay);
            } catch (const std::runtime_error&) {
                diverged = true;
                break;
            }
        }
        EpochStats stats;
        stats.train_loss = mean_loss(train_set, params, vocab, config.lambda);
        stats.train_acc = split_accuracy(train_set, params, vocab);
        stats.dev_acc = split_accuracy(dev_set, params, vocab);
        record.epochs.push_back(stats);
        if (!std::isfinite(stats.train_loss)) diverged = true;
        if (stats.dev_acc > best_dev) {
            best_dev = stats.dev_acc;
            best = params;
            stale_epochs = 0;
        } else if (++stale_epochs >= config.patience) {
            break;
        }
    }

    record.best_dev_acc = best_dev;
    record.final_train_acc = split_accuracy(train_set, best, vocab);
    record.degenerate =
        diverged || record.final_train_acc <= config.degenerate_threshold;

    TrainResult result;
    result.params = std::move(best);
    result.vocab = std::move(vocab);
    result.record = std::move(record);
    return result;
}

TrainResult train(const std::vector<Instance>& dataset, const TrainingConfig& config) {
    return train(dataset, config, config.base_seed);
}

MultiSeedSummary multi_seed_run(const std::vector<Instance>& dataset,
                                const TrainingConfig& config, const MetricFn& metric) {
    config.check();
    MultiSeedSummary summary;
    for (int i = 0; i < config.n_seeds; ++i) {
        Seed seed{config.base_seed.value + static_cast<uint64_t>(i)};
        TrainResult result = train(dataset, config, seed);
        double value = metric ? metric(result.params, result.vocab) : 0.0;
        summary.runs.push_back(result.record);
        summary.metrics.push_back(value);
        summary.results.push_back(std::move(result));
    }
    double sum = 0.0;
    for (size_t i = 0; i < summary.runs.size(); ++i) {
        if (!summary.runs[i].degenerate) {
            ++summary.non_degenerate;
            sum += summary.metrics[i];
        }
    }
    if (summary.non_degenerate > 0) {
        double mean = sum / summary.non_degenerate;
        double var = 0.0;
        for (size_t i = 0; i < summary.runs.size(); ++i) {
            if (!summary.runs[i].degenerate) {
                double dev = summary.metrics[i] - mean;
                var += dev * dev;
            }
        }
        summary.metric_mean = mean;
        summary.metric_std = std::sqrt(var / summary.non_degenerate);
    }
    return summary;
}

std::string summary_to_json(const MultiSeedSummary& summary) {
    json obj;
    json runs = json::array();
    for (size_t i = 0; i < summary.runs.size(); ++i) {
        const RunRecord& r = summary.runs[i];
        json run;
        run["seed"] = r.seed;
        run["final_train_acc"] = r.final_train_acc;
        run["best_dev_acc"] = r.best_dev_acc;
        run["degenerate"] = r.degenerate;
        run["metric"] = summary.metrics[i];
        runs.push_back(std::move(run));
    }
    obj["runs"] = std::move(runs);
    obj["non_degenerate"] = summary.non_degenerate;
    obj["metric_mean"] = summary.metric_mean ? json(*summary.metric_mean) : json(nullptr);
    obj["metric_std"] = summary.metric_std ? json(*summary.metric_std) : json(nullptr);
    obj["split"] = "per-seed";  // the 9:1 split is re-randomized with each run seed
    return obj.dump(2);
}

}  // namespace copa
