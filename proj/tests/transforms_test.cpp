#include <doctest.h>

#include <set>

#include "copa/corpus.hpp"
#include "copa/transforms.hpp"
#include "test_util.hpp"

using namespace copa;
using namespace copa::test;

namespace {

std::vector<Instance> binary_fixture(size_t n) {
    std::vector<Instance> out;
    for (size_t i = 0; i < n; ++i) {
        out.push_back(make_instance(
            "i" + std::to_string(i), "premise " + std::to_string(i),
            i % 2 == 0 ? AskFor::cause : AskFor::effect,
            {"alpha " + std::to_string(i), "beta " + std::to_string(i)},
            static_cast<int>(i % 2)));
    }
    return out;
}

}  // namespace

TEST_CASE("make_ternary_premise appends the premise, gold unchanged") {
    auto in = binary_fixture(2);
    in[1].premise = "P";
    in[1].alternatives = {"A", "B"};
    in[1].gold = 1;
    auto out = make_ternary_premise(in);
    REQUIRE(out.size() == 2);
    CHECK(out[1].alternatives == std::vector<std::string>{"A", "B", "P"});
    CHECK(out[1].gold == 1);
    CHECK(out[1].id == "i1-prem");
    for (const auto& inst : out) {
        CHECK(validate(inst, tokenizer()).empty());
        CHECK(inst.gold != 2);
    }
    CHECK_THROWS_AS(make_ternary_premise(out), CorpusError);
}

TEST_CASE("make_ternary_random is deterministic and never self-samples") {
    auto in = binary_fixture(20);
    auto a = make_ternary_random(in, Seed{42});
    auto b = make_ternary_random(in, Seed{42});
    REQUIRE(a.size() == in.size());
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].alternatives == b[i].alternatives);
        CHECK(a[i].id == in[i].id + "-rand");
        CHECK(a[i].gold == in[i].gold);
        // Distractor must come from another instance.
        CHECK(a[i].alternatives[2] != in[i].alternatives[0]);
        CHECK(a[i].alternatives[2] != in[i].alternatives[1]);
        CHECK(validate(a[i], tokenizer()).empty());
    }
    auto c = make_ternary_random(in, Seed{43});
    bool any_diff = false;
    for (size_t i = 0; i < a.size(); ++i) {
        if (a[i].alternatives[2] != c[i].alternatives[2]) any_diff = true;
    }
    CHECK(any_diff);
}

TEST_CASE("make_ternary_random on 2 instances takes the only candidate") {
    auto in = binary_fixture(2);
    auto out = make_ternary_random(in, Seed{7});
    // For instance 0 the only candidate is instance 1's non-gold alternative.
    CHECK(out[0].alternatives[2] == in[1].alternatives[1 - in[1].gold]);
    CHECK(out[1].alternatives[2] == in[0].alternatives[1 - in[0].gold]);
    CHECK_THROWS_AS(make_ternary_random(binary_fixture(1), Seed{7}), CorpusError);
}

TEST_CASE("make_masked assigns deterministic overrides and rejects re-masking") {
    auto in = binary_fixture(50);
    auto a = make_masked(in, Seed{5});
    auto b = make_masked(in, Seed{5});
    for (size_t i = 0; i < a.size(); ++i) {
        REQUIRE(a[i].arrangement_override.has_value());
        CHECK(a[i].arrangement_override == b[i].arrangement_override);
        CHECK(a[i].premise == in[i].premise);
        CHECK(a[i].gold == in[i].gold);
    }
    CHECK_THROWS_AS(make_masked(a, Seed{5}), CorpusError);
}

TEST_CASE("make_masked flips roughly half of the question types") {
    auto in = binary_fixture(1000);
    for (uint64_t seed : {1ULL, 99ULL, 123456789ULL}) {
        auto out = make_masked(in, Seed{seed});
        size_t flipped = 0;
        for (const auto& inst : out) {
            bool kept = (*inst.arrangement_override == Arrangement::as_cause) ==
                        (inst.ask_for == AskFor::cause);
            if (!kept) ++flipped;
        }
        double frac = static_cast<double>(flipped) / out.size();
        CHECK(frac >= 0.40);
        CHECK(frac <= 0.60);
    }
}

TEST_CASE("expand_bcopa_ce yields two instances per triplet with balanced tokens") {
    std::vector<Triplet> triplets;
    for (int i = 0; i < 50; ++i) {
        triplets.push_back({"t" + std::to_string(i), "premise " + std::to_string(i),
                            "cause text " + std::to_string(i),
                            "effect text " + std::to_string(i)});
    }
    auto out = expand_bcopa_ce(triplets, Seed{11});
    REQUIRE(out.size() == 100);
    for (size_t i = 0; i < triplets.size(); ++i) {
        const Instance& c = out[2 * i];
        const Instance& e = out[2 * i + 1];
        CHECK(c.id == triplets[i].id + "-c");
        CHECK(e.id == triplets[i].id + "-e");
        CHECK(c.ask_for == AskFor::cause);
        CHECK(e.ask_for == AskFor::effect);
        CHECK(c.alternatives[c.gold] == triplets[i].cause);
        CHECK(e.alternatives[e.gold] == triplets[i].effect);
        std::set<std::string> alts(c.alternatives.begin(), c.alternatives.end());
        CHECK(alts == std::set<std::string>{triplets[i].cause, triplets[i].effect});
        CHECK(validate(c, tokenizer()).empty());
    }
    CHECK(token_distribution_audit(out, tokenizer()).imbalance == 0.0);

    auto again = expand_bcopa_ce(triplets, Seed{11});
    for (size_t i = 0; i < out.size(); ++i) CHECK(out[i].gold == again[i].gold);
}

TEST_CASE("mirror_augment flips gold and balances the union") {
    auto in = binary_fixture(5);
    std::unordered_map<std::string, std::string> map;
    for (const auto& inst : in) map[inst.id] = "modified " + inst.premise;
    auto out = mirror_augment(in, map);
    REQUIRE(out.size() == 10);
    for (size_t i = 0; i < in.size(); ++i) {
        const Instance& m = out[in.size() + i];
        CHECK(m.id == in[i].id + "-mirror");
        CHECK(m.premise == map[in[i].id]);
        CHECK(m.gold == 1 - in[i].gold);
        CHECK(m.alternatives == in[i].alternatives);
        CHECK(m.ask_for == in[i].ask_for);
    }
    // Each alternative pair appears once as gold and once as non-gold.
    CHECK(token_distribution_audit(out, tokenizer()).imbalance == 0.0);

    map.erase("i3");
    CHECK_THROWS_WITH_AS(mirror_augment(in, map),
                         "mirror_augment: no premise_map entry for id \"i3\"", CorpusError);
}

TEST_CASE("split_train_dev partitions deterministically") {
    auto in = binary_fixture(100);
    auto [train, dev] = split_train_dev(in, 0.1, Seed{3});
    CHECK(train.size() == 90);
    CHECK(dev.size() == 10);

    std::set<std::string> ids;
    for (const auto& i : train) ids.insert(i.id);
    for (const auto& i : dev) ids.insert(i.id);
    CHECK(ids.size() == 100);

    auto [train2, dev2] = split_train_dev(in, 0.1, Seed{3});
    for (size_t i = 0; i < dev.size(); ++i) CHECK(dev[i].id == dev2[i].id);

    CHECK_THROWS_AS(split_train_dev(binary_fixture(1), 0.5, Seed{1}), CorpusError);
    CHECK_THROWS_AS(split_train_dev(in, 0.0, Seed{1}), CorpusError);
    CHECK_THROWS_AS(split_train_dev(in, 1.0, Seed{1}), CorpusError);

    // Dev never collapses to zero.
    auto [t3, d3] = split_train_dev(binary_fixture(30), 0.01, Seed{1});
    CHECK(d3.size() == 1);
}

TEST_CASE("load_premise_map parses JSONL entries") {
    TempDir dir;
    std::string path = dir.file("map.jsonl");
    write_file(path, R"({"id":"a","modified_premise":"New premise."})" "\n");
    auto map = load_premise_map(path);
    REQUIRE(map.size() == 1);
    CHECK(map.at("a") == "New premise.");

    write_file(path, R"({"id":"a"})" "\n");
    CHECK_THROWS_AS(load_premise_map(path), CorpusError);
}
