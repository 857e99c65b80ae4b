#include "copa/evaluation.hpp"

#include <cstdio>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include <json.hpp>

namespace copa {

using json = nlohmann::ordered_json;

Scorer model_scorer(const ModelParams& params, const Vocab& vocab) {
    return [&params, &vocab](const Instance& inst) { return predict(inst, params, vocab); };
}

Scorer lexical_scorer() {
    return [](const Instance& inst) {
        int best = 0;
        double best_s = lexical_similarity_score(inst.premise, inst.alternatives[0]);
        for (int i = 1; i < static_cast<int>(inst.alternatives.size()); ++i) {
            double s = lexical_similarity_score(inst.premise, inst.alternatives[i]);
            if (s > best_s) {
                best = i;
                best_s = s;
            }
        }
        return best;
    };
}

double accuracy(const Scorer& scorer, const std::vector<Instance>& dataset) {
    if (dataset.empty()) throw std::runtime_error("accuracy: empty dataset");
    size_t correct = 0;
    for (const Instance& inst : dataset)
        if (scorer(inst) == inst.gold) ++correct;
    return static_cast<double>(correct) / static_cast<double>(dataset.size());
}

namespace {

void check_derived_ids(const std::vector<Instance>& base, const std::vector<Instance>& derived,
                       const std::string& suffix, const char* name) {
    if (base.size() != derived.size()) {
        throw std::runtime_error(std::string("evaluate_perturbation: ") + name +
                                 " size differs from the binary test set");
    }
    for (size_t i = 0; i < base.size(); ++i) {
        if (derived[i].id != base[i].id + suffix) {
            throw std::runtime_error(std::string("evaluate_perturbation: ") + name +
                                     " id \"" + derived[i].id +
                                     "\" does not match test id \"" + base[i].id + "\"");
        }
    }
}

}  // namespace

PerturbationResult evaluate_perturbation(const ModelParams& params, const Vocab& vocab,
                                         const std::vector<Instance>& binary_test,
                                         const std::vector<Instance>& rand_set,
                                         const std::vector<Instance>& prem_set) {
    check_derived_ids(binary_test, rand_set, "-rand", "rand_set");
    check_derived_ids(binary_test, prem_set, "-prem", "prem_set");
    Scorer scorer = model_scorer(params, vocab);
    PerturbationResult r;
    r.rand_acc = accuracy(scorer, rand_set);
    r.prem_acc = accuracy(scorer, prem_set);
    r.delta = r.rand_acc - r.prem_acc;
    return r;
}

MaskedResult evaluate_masked_detail(const Scorer& scorer,
                                    const std::vector<Instance>& masked_set) {
    if (masked_set.empty()) throw std::runtime_error("evaluate_masked: empty dataset");
    MaskedResult r;
    size_t correct = 0, kept_correct = 0, flipped_correct = 0;
    for (const Instance& inst : masked_set) {
        if (!inst.arrangement_override) {
            throw std::runtime_error("evaluate_masked: instance \"" + inst.id +
                                     "\" has no arrangement_override");
        }
        bool kept = (*inst.arrangement_override == Arrangement::as_cause) ==
                    (inst.ask_for == AskFor::cause);
        bool ok = scorer(inst) == inst.gold;
        if (ok) ++correct;
        if (kept) {
            ++r.kept_count;
            if (ok) ++kept_correct;
        } else {
            ++r.flipped_count;
            if (ok) ++flipped_correct;
        }
    }
    r.overall = static_cast<double>(correct) / static_cast<double>(masked_set.size());
    r.kept_acc = r.kept_count ? static_cast<double>(kept_correct) / r.kept_count : 0.0;
    r.flipped_acc =
        r.flipped_count ? static_cast<double>(flipped_correct) / r.flipped_count : 0.0;
    return r;
}

double evaluate_masked(const Scorer& scorer, const std::vector<Instance>& masked_set) {
    return evaluate_masked_detail(scorer, masked_set).overall;
}

double expected_masked_accuracy(double original_acc) {
    if (original_acc < 0.0 || original_acc > 1.0) {
        throw std::runtime_error("expected_masked_accuracy: accuracy must be in [0,1]");
    }
    return 0.25 + original_acc / 2.0;
}

double subset_accuracy(const Scorer& scorer, const std::vector<Instance>& dataset,
                       const std::string& tag) {
    std::vector<Instance> tagged;
    for (const Instance& inst : dataset) {
        for (const std::string& t : inst.tags) {
            if (t == tag) {
                tagged.push_back(inst);
                break;
            }
        }
    }
    if (tagged.empty()) {
        throw std::runtime_error("subset_accuracy: tag \"" + tag + "\" not present");
    }
    return accuracy(scorer, tagged);
}

ProbeReport probe(const ModelParams& params, const Vocab& vocab,
                  const std::vector<Instance>& test,
                  const std::vector<Instance>& rand_set,
                  const std::vector<Instance>& prem_set,
                  const std::vector<Instance>& masked_set,
                  const std::vector<Instance>& challenge_set) {
    Scorer scorer = model_scorer(params, vocab);
    ProbeReport report;
    report.test_acc = accuracy(scorer, test);
    PerturbationResult p = evaluate_perturbation(params, vocab, test, rand_set, prem_set);
    report.rand_acc = p.rand_acc;
    report.prem_acc = p.prem_acc;
    report.perturbation_delta = p.delta;
    report.masked_detail = evaluate_masked_detail(scorer, masked_set);
    report.masked_acc = report.masked_detail.overall;
    report.expected_masked_acc = expected_masked_accuracy(report.test_acc);
    report.challenge_acc = accuracy(scorer, challenge_set);
    report.challenge_delta = report.test_acc - report.challenge_acc;
    return report;
}

std::string probe_report_to_json(const ProbeReport& r) {
    json obj;
    obj["test_acc"] = r.test_acc;
    obj["rand_acc"] = r.rand_acc;
    obj["prem_acc"] = r.prem_acc;
    obj["perturbation_delta"] = r.perturbation_delta;
    obj["masked_acc"] = r.masked_acc;
    obj["expected_masked_acc"] = r.expected_masked_acc;
    obj["challenge_acc"] = r.challenge_acc;
    obj["challenge_delta"] = r.challenge_delta;
    json meta;
    meta["tie_rule"] = "lower-index";
    meta["masked_kept_acc"] = r.masked_detail.kept_acc;
    meta["masked_flipped_acc"] = r.masked_detail.flipped_acc;
    meta["masked_kept_count"] = r.masked_detail.kept_count;
    meta["masked_flipped_count"] = r.masked_detail.flipped_count;
    obj["metadata"] = std::move(meta);
    return obj.dump(2);
}

std::string probe_report_to_table(const ProbeReport& r) {
    char buf[256];
    std::ostringstream out;
    out << "Rand    Prem    Delta   Test    Mask\n";
    std::snprintf(buf, sizeof(buf), "%-8.3f%-8.3f%-8.3f%-8.3f%-8.3f\n", r.rand_acc,
                  r.prem_acc, r.perturbation_delta, r.test_acc, r.masked_acc);
    out << buf;
    out << "\nTest    Chall   Delta\n";
    std::snprintf(buf, sizeof(buf), "%-8.3f%-8.3f%-8.3f\n", r.test_acc, r.challenge_acc,
                  r.challenge_delta);
    out << buf;
    return out.str();
}

}  // namespace copa
