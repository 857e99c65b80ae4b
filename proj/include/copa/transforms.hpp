#pragma once

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "copa/corpus.hpp"
#include "copa/rng.hpp"

namespace copa {

// Appends the premise as a third alternative ("-prem" ids, gold unchanged).
std::vector<Instance> make_ternary_premise(const std::vector<Instance>& test_set);

// Appends a distractor drawn from the non-gold alternatives of other
// instances ("-rand" ids, gold unchanged, sampled per instance with
// replacement across the dataset).
std::vector<Instance> make_ternary_random(const std::vector<Instance>& test_set, Seed seed);

// Assigns each instance a coin-flip arrangement_override; ids, premise,
// alternatives and gold are untouched.
std::vector<Instance> make_masked(const std::vector<Instance>& test_set, Seed seed);

// Expands each triplet into two binary instances, one per question type,
// with the {cause, effect} alternative positions shuffled ("-c"/"-e" ids).
// Output token distribution over gold vs non-gold alternatives is exactly
// balanced.
std::vector<Instance> expand_bcopa_ce(const std::vector<Triplet>& triplets, Seed seed);

// Original instances followed by their label-flipped mirrors with
// externally supplied modified premises ("-mirror" ids).
std::vector<Instance> mirror_augment(
    const std::vector<Instance>& dataset,
    const std::unordered_map<std::string, std::string>& premise_map);

// Seeded shuffle then split; dev gets round(dev_ratio * n), at least 1.
std::pair<std::vector<Instance>, std::vector<Instance>> split_train_dev(
    const std::vector<Instance>& dataset, double dev_ratio, Seed seed);

// premise_map JSONL: {"id", "modified_premise"} per line.
std::unordered_map<std::string, std::string> load_premise_map(const std::string& path);

}  // namespace copa
