#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "copa/analysis.hpp"
#include "copa/corpus.hpp"
#include "copa/evaluation.hpp"
#include "copa/model.hpp"
#include "copa/training.hpp"
#include "copa/transforms.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitRuntime = 3;

copa::Tokenizer tokenizer() {
    return [](const std::string& text) { return copa::tokenize(text); };
}

int cmd_validate(const std::string& in, const std::string& kind) {
    size_t bad = 0;
    if (kind == "instances") {
        auto records = copa::load_instances_jsonl(in);
        for (const auto& r : records) {
            for (const std::string& v : copa::validate(r, tokenizer())) {
                std::cout << r.id << ": " << v << "\n";
                ++bad;
            }
        }
        std::cout << records.size() << " records, " << bad << " violations\n";
    } else {
        auto records = copa::load_triplets_jsonl(in);
        for (const auto& r : records) {
            for (const std::string& v : copa::validate(r, tokenizer())) {
                std::cout << r.id << ": " << v << "\n";
                ++bad;
            }
        }
        std::cout << records.size() << " records, " << bad << " violations\n";
    }
    return bad == 0 ? kExitOk : kExitData;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw copa::CorpusError("cannot write file: " + path);
    out << text;
    if (!text.empty() && text.back() != '\n') out << "\n";
}

int cmd_audit(const std::string& in, const std::string& out_path) {
    auto dataset = copa::load_instances_jsonl(in);
    copa::AuditReport report = copa::token_distribution_audit(dataset, tokenizer());
    std::cout << "imbalance: " << report.imbalance << " over " << report.tokens.size()
              << " token types\n";
    if (!out_path.empty()) write_text(out_path, copa::audit_report_to_json(report));
    return kExitOk;
}

int cmd_transform(const std::string& mode, const std::string& in, const std::string& out,
                  const std::string& out2, std::optional<uint64_t> seed,
                  const std::string& premise_map_path, double dev_ratio) {
    auto require_seed = [&] {
        if (!seed) {
            std::cerr << "transform --mode " << mode << " requires --seed\n";
            std::exit(kExitUsage);
        }
        return copa::Seed{*seed};
    };
    if (mode == "prem") {
        copa::save_jsonl(copa::make_ternary_premise(copa::load_instances_jsonl(in)), out);
    } else if (mode == "rand") {
        copa::save_jsonl(
            copa::make_ternary_random(copa::load_instances_jsonl(in), require_seed()), out);
    } else if (mode == "mask") {
        copa::save_jsonl(copa::make_masked(copa::load_instances_jsonl(in), require_seed()),
                         out);
    } else if (mode == "bcopa-ce") {
        copa::save_jsonl(
            copa::expand_bcopa_ce(copa::load_triplets_jsonl(in), require_seed()), out);
    } else if (mode == "mirror") {
        if (premise_map_path.empty()) {
            std::cerr << "transform --mode mirror requires --premise-map\n";
            return kExitUsage;
        }
        copa::save_jsonl(copa::mirror_augment(copa::load_instances_jsonl(in),
                                              copa::load_premise_map(premise_map_path)),
                         out);
    } else if (mode == "split") {
        if (out2.empty()) {
            std::cerr << "transform --mode split requires --out2 for the dev part\n";
            return kExitUsage;
        }
        auto [train, dev] = copa::split_train_dev(copa::load_instances_jsonl(in), dev_ratio,
                                                  require_seed());
        copa::save_jsonl(train, out);
        copa::save_jsonl(dev, out2);
    } else {
        std::cerr << "unknown transform mode: " << mode << "\n";
        return kExitUsage;
    }
    return kExitOk;
}

int cmd_train(const std::string& config_path, const std::string& data_path,
              const std::string& out_path, uint64_t seed) {
    copa::TrainingConfig config;
    try {
        config = copa::load_config(config_path);
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return kExitUsage;
    }
    auto dataset = copa::load_instances_jsonl(data_path);
    copa::TrainResult result = copa::train(dataset, config, copa::Seed{seed});
    copa::save_model(result.params, result.vocab, out_path);
    std::cout << "seed " << result.record.seed << ": final train acc "
              << result.record.final_train_acc << ", best dev acc "
              << result.record.best_dev_acc
              << (result.record.degenerate ? " (degenerate)" : "") << "\n";
    return kExitOk;
}

int cmd_seeds(const std::string& config_path, const std::string& data_path,
              const std::string& metric, const std::string& eval_path,
              const std::string& out_path, std::optional<uint64_t> seed) {
    copa::TrainingConfig config;
    try {
        config = copa::load_config(config_path);
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return kExitUsage;
    }
    if (seed) config.base_seed.value = *seed;
    auto dataset = copa::load_instances_jsonl(data_path);
    auto eval_set = copa::load_instances_jsonl(eval_path);
    copa::MetricFn fn = [&](const copa::ModelParams& p, const copa::Vocab& v) {
        return copa::accuracy(copa::model_scorer(p, v), eval_set);
    };
    copa::MultiSeedSummary summary = copa::multi_seed_run(dataset, config, fn);
    write_text(out_path, copa::summary_to_json(summary));
    std::cout << summary.non_degenerate << "/" << summary.runs.size()
              << " non-degenerate runs";
    if (summary.metric_mean) {
        std::cout << ", mean " << metric << " " << *summary.metric_mean << " (std "
                  << *summary.metric_std << ")";
    } else {
        std::cout << ", no " << metric << " mean (all runs degenerate)";
    }
    std::cout << "\n";
    return kExitOk;
}

int cmd_eval(const std::string& model_path, const std::string& data_path,
             const std::string& tag, bool lexical, bool masked) {
    auto dataset = copa::load_instances_jsonl(data_path);
    copa::ModelParams params;
    copa::Vocab vocab;
    copa::Scorer scorer;
    if (lexical) {
        scorer = copa::lexical_scorer();
    } else {
        std::tie(params, vocab) = copa::load_model(model_path);
        scorer = copa::model_scorer(params, vocab);
    }
    double acc;
    if (masked) {
        acc = copa::evaluate_masked(scorer, dataset);
    } else if (!tag.empty()) {
        acc = copa::subset_accuracy(scorer, dataset, tag);
    } else {
        acc = copa::accuracy(scorer, dataset);
    }
    std::cout << "accuracy: " << acc << "\n";
    return kExitOk;
}

int cmd_probe(const std::string& model_path, const std::string& test_path,
              const std::string& rand_path, const std::string& prem_path,
              const std::string& mask_path, const std::string& challenge_path,
              const std::string& report_path) {
    auto [params, vocab] = copa::load_model(model_path);
    copa::ProbeReport report = copa::probe(
        params, vocab, copa::load_instances_jsonl(test_path),
        copa::load_instances_jsonl(rand_path), copa::load_instances_jsonl(prem_path),
        copa::load_instances_jsonl(mask_path), copa::load_instances_jsonl(challenge_path));
    std::cout << copa::probe_report_to_table(report);
    if (!report_path.empty()) write_text(report_path, copa::probe_report_to_json(report));
    return kExitOk;
}

int cmd_importance(const std::string& model_path, const std::string& data_path,
                   const std::string& out_path) {
    auto [params, vocab] = copa::load_model(model_path);
    auto dataset = copa::load_instances_jsonl(data_path);
    std::vector<copa::ImportanceProfile> profiles;
    for (const copa::Instance& inst : dataset) {
        profiles.push_back(copa::erasure_importance(params, vocab, inst));
    }
    copa::export_importance_csv(profiles, out_path);
    std::cout << profiles.size() << " profiles written to " << out_path << "\n";
    return kExitOk;
}

int cmd_kappa(const std::string& ratings_path) {
    copa::RatingsMatrix ratings = copa::load_ratings_csv(ratings_path);
    copa::MajorityVoteResult votes = copa::majority_vote(ratings);
    try {
        std::cout << "fleiss_kappa: " << copa::fleiss_kappa(ratings) << "\n";
    } catch (const copa::DegenerateMarginalError& e) {
        std::cout << "fleiss_kappa: undefined (" << e.what() << ")\n";
    }
    std::cout << "items: " << ratings.item_ids.size() << ", unresolved ties: "
              << votes.unresolved << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"COPA robustness toolkit"};
    app.require_subcommand(1);

    std::string in, out, out2, kind = "instances", mode, premise_map, config_path,
                data_path, model_path, metric = "test-acc", eval_path, tag, test_path,
                rand_path, prem_path, mask_path, challenge_path, report_path, ratings_path;
    std::optional<uint64_t> seed_opt;
    uint64_t seed = 0;
    double dev_ratio = 0.1;
    bool lexical = false, masked = false;

    auto* validate = app.add_subcommand("validate", "validate a JSONL dataset");
    validate->add_option("--in", in)->required();
    validate->add_option("--kind", kind)->check(CLI::IsMember({"instances", "triplets"}));

    auto* audit = app.add_subcommand("audit", "token distribution audit");
    audit->add_option("--in", in)->required();
    audit->add_option("--out", out);

    auto* transform = app.add_subcommand("transform", "build a derived dataset");
    transform->add_option("--mode", mode)
        ->required()
        ->check(CLI::IsMember({"rand", "prem", "mask", "bcopa-ce", "mirror", "split"}));
    transform->add_option("--in", in)->required();
    transform->add_option("--out", out)->required();
    transform->add_option("--out2", out2);
    transform->add_option("--seed", seed_opt);
    transform->add_option("--premise-map", premise_map);
    transform->add_option("--dev-ratio", dev_ratio);

    auto* train = app.add_subcommand("train", "train one model");
    train->add_option("--config", config_path)->required();
    train->add_option("--data", data_path)->required();
    train->add_option("--out", out)->required();
    train->add_option("--seed", seed)->required();

    auto* seeds = app.add_subcommand("seeds", "multi-seed training summary");
    seeds->add_option("--config", config_path)->required();
    seeds->add_option("--data", data_path)->required();
    seeds->add_option("--metric", metric)
        ->check(CLI::IsMember({"test-acc", "challenge-acc"}));
    seeds->add_option("--eval-data", eval_path)->required();
    seeds->add_option("--out", out)->required();
    seeds->add_option("--seed", seed_opt);

    auto* eval = app.add_subcommand("eval", "accuracy of a model or the lexical baseline");
    eval->add_option("--model", model_path);
    eval->add_option("--data", data_path)->required();
    eval->add_option("--tag", tag);
    eval->add_flag("--lexical", lexical);
    eval->add_flag("--masked", masked);

    auto* probe = app.add_subcommand("probe", "full perturbation/masking/challenge probe");
    probe->add_option("--model", model_path)->required();
    probe->add_option("--test", test_path)->required();
    probe->add_option("--rand", rand_path)->required();
    probe->add_option("--prem", prem_path)->required();
    probe->add_option("--mask", mask_path)->required();
    probe->add_option("--challenge", challenge_path)->required();
    probe->add_option("--report", report_path);

    auto* importance = app.add_subcommand("importance", "erasure token importance CSV");
    importance->add_option("--model", model_path)->required();
    importance->add_option("--data", data_path)->required();
    importance->add_option("--out", out)->required();

    auto* kappa = app.add_subcommand("kappa", "Fleiss' kappa and majority vote");
    kappa->add_option("--ratings", ratings_path)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (validate->parsed()) return cmd_validate(in, kind);
        if (audit->parsed()) return cmd_audit(in, out);
        if (transform->parsed()) {
            return cmd_transform(mode, in, out, out2, seed_opt, premise_map, dev_ratio);
        }
        if (train->parsed()) return cmd_train(config_path, data_path, out, seed);
        if (seeds->parsed()) {
            return cmd_seeds(config_path, data_path, metric, eval_path, out, seed_opt);
        }
        if (eval->parsed()) {
            if (!lexical && model_path.empty()) {
                std::cerr << "eval requires --model unless --lexical is given\n";
                return kExitUsage;
            }
            return cmd_eval(model_path, data_path, tag, lexical, masked);
        }
        if (probe->parsed()) {
            return cmd_probe(model_path, test_path, rand_path, prem_path, mask_path,
                             challenge_path, report_path);
        }
        if (importance->parsed()) return cmd_importance(model_path, data_path, out);
        if (kappa->parsed()) return cmd_kappa(ratings_path);
    } catch (const copa::CorpusError& e) {
        std::cerr << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}
