#pragma once

#include <functional>
#include <string>
#include <vector>

#include "copa/corpus.hpp"
#include "copa/model.hpp"

namespace copa {

// Maps an instance to a chosen alternative index.
using Scorer = std::function<int(const Instance&)>;

Scorer model_scorer(const ModelParams& params, const Vocab& vocab);
// Picks the alternative most Jaccard-similar to the premise (ties to the
// lower index).
Scorer lexical_scorer();

double accuracy(const Scorer& scorer, const std::vector<Instance>& dataset);

struct PerturbationResult {
    double rand_acc = 0.0;
    double prem_acc = 0.0;
    double delta = 0.0;  // rand_acc - prem_acc
};

PerturbationResult evaluate_perturbation(const ModelParams& params, const Vocab& vocab,
                                         const std::vector<Instance>& binary_test,
                                         const std::vector<Instance>& rand_set,
                                         const std::vector<Instance>& prem_set);

// Accuracy under override-driven arrangement, scored against original gold,
// plus the two strata (override kept vs flipped the true question type).
struct MaskedResult {
    double overall = 0.0;
    double kept_acc = 0.0;     // override agrees with ask_for
    double flipped_acc = 0.0;  // override disagrees
    size_t kept_count = 0;
    size_t flipped_count = 0;
};

double evaluate_masked(const Scorer& scorer, const std::vector<Instance>& masked_set);
MaskedResult evaluate_masked_detail(const Scorer& scorer,
                                    const std::vector<Instance>& masked_set);

// Theoretical masked accuracy of a perfectly question-sensitive model:
// half chance (0.25) plus half the original accuracy.
double expected_masked_accuracy(double original_acc);

double subset_accuracy(const Scorer& scorer, const std::vector<Instance>& dataset,
                       const std::string& tag);

struct ProbeReport {
    double test_acc = 0.0;
    double rand_acc = 0.0;
    double prem_acc = 0.0;
    double perturbation_delta = 0.0;  // rand_acc - prem_acc
    double masked_acc = 0.0;
    double expected_masked_acc = 0.0;
    double challenge_acc = 0.0;
    double challenge_delta = 0.0;  // test_acc - challenge_acc
    MaskedResult masked_detail;
};

ProbeReport probe(const ModelParams& params, const Vocab& vocab,
                  const std::vector<Instance>& test,
                  const std::vector<Instance>& rand_set,
                  const std::vector<Instance>& prem_set,
                  const std::vector<Instance>& masked_set,
                  const std::vector<Instance>& challenge_set);

std::string probe_report_to_json(const ProbeReport& report);
// Aligned text table: Rand, Prem, Delta, Test, Mask plus Test, Challenge,
// Delta rows.
std::string probe_report_to_table(const ProbeReport& report);

}  // namespace copa
