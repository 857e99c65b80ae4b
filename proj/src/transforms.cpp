#include "copa/transforms.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

namespace copa {

namespace {

void require_binary(const std::vector<Instance>& set, const char* op) {
    for (const Instance& inst : set) {
        if (inst.alternatives.size() != 2) {
            throw CorpusError(std::string(op) + ": instance \"" + inst.id +
                              "\" is not binary");
        }
    }
}

}  // namespace

std::vector<Instance> make_ternary_premise(const std::vector<Instance>& test_set) {
    require_binary(test_set, "make_ternary_premise");
    std::vector<Instance> out;
    out.reserve(test_set.size());
    for (const Instance& inst : test_set) {
        Instance t = inst;
        t.id += "-prem";
        t.alternatives.push_back(inst.premise);
        out.push_back(std::move(t));
    }
    return out;
}

std::vector<Instance> make_ternary_random(const std::vector<Instance>& test_set, Seed seed) {
    require_binary(test_set, "make_ternary_random");
    if (test_set.size() < 2) {
        throw CorpusError("make_ternary_random: need at least 2 instances");
    }
    // Pool of (owner, text) over all non-gold alternatives.
    std::vector<std::pair<size_t, const std::string*>> pool;
    for (size_t i = 0; i < test_set.size(); ++i) {
        const Instance& inst = test_set[i];
        for (size_t a = 0; a < inst.alternatives.size(); ++a) {
            if (static_cast<int>(a) != inst.gold) pool.emplace_back(i, &inst.alternatives[a]);
        }
    }
    SplitMix64 rng(seed.value);
    std::vector<Instance> out;
    out.reserve(test_set.size());
    for (size_t i = 0; i < test_set.size(); ++i) {
        size_t own = 0;
        for (const auto& [owner, text] : pool)
            if (owner == i) ++own;
        uint64_t k = rng.next_below(pool.size() - own);
        const std::string* picked = nullptr;
        for (const auto& [owner, text] : pool) {
            if (owner == i) continue;
            if (k == 0) {
                picked = text;
                break;
            }
            --k;
        }
        Instance t = test_set[i];
        t.id += "-rand";
        t.alternatives.push_back(*picked);
        out.push_back(std::move(t));
    }
    return out;
}

std::vector<Instance> make_masked(const std::vector<Instance>& test_set, Seed seed) {
    require_binary(test_set, "make_masked");
    for (const Instance& inst : test_set) {
        if (inst.arrangement_override) {
            throw CorpusError("make_masked: instance \"" + inst.id +
                              "\" already carries an arrangement_override");
        }
    }
    SplitMix64 rng(seed.value);
    std::vector<Instance> out;
    out.reserve(test_set.size());
    for (const Instance& inst : test_set) {
        Instance t = inst;
        t.arrangement_override =
            rng.next_bool() ? Arrangement::as_cause : Arrangement::as_effect;
        out.push_back(std::move(t));
    }
    return out;
}

std::vector<Instance> expand_bcopa_ce(const std::vector<Triplet>& triplets, Seed seed) {
    SplitMix64 rng(seed.value);
    std::vector<Instance> out;
    out.reserve(triplets.size() * 2);
    for (const Triplet& t : triplets) {
        // One instance per question type; alternative order is an
        // independent coin flip per instance.
        for (AskFor q : {AskFor::cause, AskFor::effect}) {
            Instance inst;
            inst.id = t.id + (q == AskFor::cause ? "-c" : "-e");
            inst.premise = t.premise;
            inst.ask_for = q;
            const std::string& gold_text = q == AskFor::cause ? t.cause : t.effect;
            const std::string& wrong_text = q == AskFor::cause ? t.effect : t.cause;
            if (rng.next_bool()) {
                inst.alternatives = {gold_text, wrong_text};
                inst.gold = 0;
            } else {
                inst.alternatives = {wrong_text, gold_text};
                inst.gold = 1;
            }
            out.push_back(std::move(inst));
        }
    }
    return out;
}

std::vector<Instance> mirror_augment(
    const std::vector<Instance>& dataset,
    const std::unordered_map<std::string, std::string>& premise_map) {
    require_binary(dataset, "mirror_augment");
    for (const Instance& inst : dataset) {
        if (!premise_map.count(inst.id)) {
            throw CorpusError("mirror_augment: no premise_map entry for id \"" + inst.id +
                              "\"");
        }
    }
    std::vector<Instance> out;
    out.reserve(dataset.size() * 2);
    for (const Instance& inst : dataset) out.push_back(inst);
    for (const Instance& inst : dataset) {
        Instance m = inst;
        m.id += "-mirror";
        m.premise = premise_map.at(inst.id);
        m.gold = 1 - inst.gold;
        out.push_back(std::move(m));
    }
    return out;
}

std::pair<std::vector<Instance>, std::vector<Instance>> split_train_dev(
    const std::vector<Instance>& dataset, double dev_ratio, Seed seed) {
    if (dev_ratio <= 0.0 || dev_ratio >= 1.0) {
        throw CorpusError("split_train_dev: dev_ratio must be in (0, 1)");
    }
    if (dataset.size() < 2) {
        throw CorpusError("split_train_dev: need at least 2 instances");
    }
    std::vector<Instance> shuffled = dataset;
    SplitMix64 rng(seed.value);
    shuffle(shuffled, rng);
    size_t dev_size = static_cast<size_t>(
        std::llround(dev_ratio * static_cast<double>(dataset.size())));
    if (dev_size < 1) dev_size = 1;
    if (dev_size >= dataset.size()) {
        throw CorpusError("split_train_dev: dataset too small for both parts");
    }
    std::vector<Instance> dev(shuffled.begin(), shuffled.begin() + dev_size);
    std::vector<Instance> train(shuffled.begin() + dev_size, shuffled.end());
    return {std::move(train), std::move(dev)};
}

std::unordered_map<std::string, std::string> load_premise_map(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CorpusError("cannot open premise map: " + path);
    std::unordered_map<std::string, std::string> map;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw CorpusError("premise map line " + std::to_string(line_no) +
                              ": malformed JSON: " + e.what());
        }
        if (!obj.contains("id") || !obj.contains("modified_premise")) {
            throw CorpusError("premise map line " + std::to_string(line_no) +
                              ": requires \"id\" and \"modified_premise\"");
        }
        map[obj["id"].get<std::string>()] = obj["modified_premise"].get<std::string>();
    }
    return map;
}

}  // namespace copa
