#include "copa/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

namespace copa {

using json = nlohmann::ordered_json;

std::string to_string(AskFor a) { return a == AskFor::cause ? "cause" : "effect"; }
std::string to_string(Arrangement a) {
    return a == Arrangement::as_cause ? "as_cause" : "as_effect";
}

namespace {

AskFor parse_ask_for(const std::string& s, size_t line_no) {
    if (s == "cause") return AskFor::cause;
    if (s == "effect") return AskFor::effect;
    throw CorpusError("line " + std::to_string(line_no) +
                      ": ask_for must be \"cause\" or \"effect\", got \"" + s + "\"");
}

Arrangement parse_arrangement(const std::string& s, size_t line_no) {
    if (s == "as_cause") return Arrangement::as_cause;
    if (s == "as_effect") return Arrangement::as_effect;
    throw CorpusError("line " + std::to_string(line_no) +
                      ": arrangement_override must be \"as_cause\" or \"as_effect\", got \"" +
                      s + "\"");
}

json parse_line(const std::string& line, size_t line_no) {
    json obj;
    try {
        obj = json::parse(line);
    } catch (const json::parse_error& e) {
        throw CorpusError("line " + std::to_string(line_no) + ": malformed JSON: " + e.what());
    }
    if (!obj.is_object()) {
        throw CorpusError("line " + std::to_string(line_no) + ": expected a JSON object");
    }
    return obj;
}

const json& require_field(const json& obj, const char* key, size_t line_no) {
    auto it = obj.find(key);
    if (it == obj.end()) {
        throw CorpusError("line " + std::to_string(line_no) + ": missing field \"" +
                          key + "\"");
    }
    return *it;
}

std::string require_string(const json& obj, const char* key, size_t line_no) {
    const json& v = require_field(obj, key, line_no);
    if (!v.is_string()) {
        throw CorpusError("line " + std::to_string(line_no) + ": field \"" + key +
                          "\" must be a string");
    }
    return v.get<std::string>();
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CorpusError("cannot open file: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

void check_duplicate(std::unordered_set<std::string>& seen, const std::string& id,
                     size_t line_no) {
    if (!seen.insert(id).second) {
        throw CorpusError("line " + std::to_string(line_no) + ": duplicate id \"" + id + "\"");
    }
}

}  // namespace

std::vector<Instance> load_instances_jsonl(const std::string& path) {
    std::vector<Instance> out;
    std::unordered_set<std::string> seen;
    size_t line_no = 0;
    for (const std::string& line : read_lines(path)) {
        ++line_no;
        if (line.empty()) continue;
        json obj = parse_line(line, line_no);
        Instance inst;
        inst.id = require_string(obj, "id", line_no);
        check_duplicate(seen, inst.id, line_no);
        inst.premise = require_string(obj, "premise", line_no);
        inst.ask_for = parse_ask_for(require_string(obj, "ask_for", line_no), line_no);
        const json& alts = require_field(obj, "alternatives", line_no);
        if (!alts.is_array() || alts.size() < 2 || alts.size() > 3) {
            throw CorpusError("line " + std::to_string(line_no) +
                              ": field \"alternatives\" must be an array of 2 or 3 strings");
        }
        for (const auto& a : alts) {
            if (!a.is_string()) {
                throw CorpusError("line " + std::to_string(line_no) +
                                  ": field \"alternatives\" must contain only strings");
            }
            inst.alternatives.push_back(a.get<std::string>());
        }
        const json& gold = require_field(obj, "gold", line_no);
        if (!gold.is_number_integer()) {
            throw CorpusError("line " + std::to_string(line_no) +
                              ": field \"gold\" must be an integer");
        }
        inst.gold = gold.get<int>();
        if (inst.gold < 0 || inst.gold >= static_cast<int>(inst.alternatives.size())) {
            throw CorpusError("line " + std::to_string(line_no) +
                              ": field \"gold\" out of range");
        }
        if (obj.contains("arrangement_override") && !obj["arrangement_override"].is_null()) {
            inst.arrangement_override = parse_arrangement(
                require_string(obj, "arrangement_override", line_no), line_no);
        }
        if (obj.contains("tags")) {
            const json& tags = obj["tags"];
            if (!tags.is_array()) {
                throw CorpusError("line " + std::to_string(line_no) +
                                  ": field \"tags\" must be an array of strings");
            }
            for (const auto& t : tags) inst.tags.push_back(t.get<std::string>());
        }
        out.push_back(std::move(inst));
    }
    return out;
}

std::vector<Triplet> load_triplets_jsonl(const std::string& path) {
    std::vector<Triplet> out;
    std::unordered_set<std::string> seen;
    size_t line_no = 0;
    for (const std::string& line : read_lines(path)) {
        ++line_no;
        if (line.empty()) continue;
        json obj = parse_line(line, line_no);
        Triplet t;
        t.id = require_string(obj, "id", line_no);
        check_duplicate(seen, t.id, line_no);
        t.premise = require_string(obj, "premise", line_no);
        t.cause = require_string(obj, "cause", line_no);
        t.effect = require_string(obj, "effect", line_no);
        out.push_back(std::move(t));
    }
    return out;
}

namespace {

json instance_to_json(const Instance& inst) {
    json obj;
    obj["id"] = inst.id;
    obj["premise"] = inst.premise;
    obj["ask_for"] = to_string(inst.ask_for);
    obj["alternatives"] = inst.alternatives;
    obj["gold"] = inst.gold;
    if (inst.arrangement_override) {
        obj["arrangement_override"] = to_string(*inst.arrangement_override);
    }
    if (!inst.tags.empty()) obj["tags"] = inst.tags;
    return obj;
}

void write_lines(const std::vector<json>& objs, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CorpusError("cannot write file: " + path);
    for (const json& obj : objs) out << obj.dump() << "\n";
    if (!out) throw CorpusError("write failed: " + path);
}

}  // namespace

void save_jsonl(const std::vector<Instance>& records, const std::string& path) {
    std::vector<json> objs;
    objs.reserve(records.size());
    for (const Instance& r : records) objs.push_back(instance_to_json(r));
    write_lines(objs, path);
}

void save_jsonl(const std::vector<Triplet>& records, const std::string& path) {
    std::vector<json> objs;
    objs.reserve(records.size());
    for (const Triplet& r : records) {
        json obj;
        obj["id"] = r.id;
        obj["premise"] = r.premise;
        obj["cause"] = r.cause;
        obj["effect"] = r.effect;
        objs.push_back(std::move(obj));
    }
    write_lines(objs, path);
}

std::vector<std::string> validate(const Instance& inst, const Tokenizer& tokenizer) {
    std::vector<std::string> violations;
    if (inst.id.empty()) violations.push_back("empty id");
    size_t n = inst.alternatives.size();
    if (n < 2 || n > 3) violations.push_back("alternatives count must be 2 or 3");
    if (inst.gold < 0 || inst.gold >= static_cast<int>(n)) {
        violations.push_back("gold out of range");
    }
    if (tokenizer(inst.premise).empty()) violations.push_back("empty premise");
    for (size_t i = 0; i < n; ++i) {
        if (tokenizer(inst.alternatives[i]).empty()) {
            violations.push_back("empty alternative " + std::to_string(i));
        }
    }
    return violations;
}

std::vector<std::string> validate(const Triplet& t, const Tokenizer& tokenizer) {
    std::vector<std::string> violations;
    if (t.id.empty()) violations.push_back("empty id");
    if (tokenizer(t.premise).empty()) violations.push_back("empty premise");
    if (tokenizer(t.cause).empty()) violations.push_back("empty cause");
    if (tokenizer(t.effect).empty()) violations.push_back("empty effect");
    return violations;
}

AuditReport token_distribution_audit(const std::vector<Instance>& dataset,
                                     const Tokenizer& tokenizer) {
    if (dataset.empty()) throw CorpusError("token_distribution_audit: empty dataset");
    std::map<std::string, TokenCount> counts;
    for (const Instance& inst : dataset) {
        for (size_t i = 0; i < inst.alternatives.size(); ++i) {
            bool is_gold = static_cast<int>(i) == inst.gold;
            for (const std::string& tok : tokenizer(inst.alternatives[i])) {
                TokenCount& tc = counts[tok];
                tc.token = tok;
                if (is_gold) ++tc.correct;
                else ++tc.wrong;
            }
        }
    }
    AuditReport report;
    long num = 0, den = 0;
    for (const auto& [tok, tc] : counts) {
        num += std::labs(tc.correct - tc.wrong);
        den += tc.correct + tc.wrong;
        report.tokens.push_back(tc);
    }
    report.imbalance = den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
    std::stable_sort(report.tokens.begin(), report.tokens.end(),
                     [](const TokenCount& a, const TokenCount& b) {
                         long da = std::labs(a.correct - a.wrong);
                         long db = std::labs(b.correct - b.wrong);
                         if (da != db) return da > db;
                         return a.token < b.token;
                     });
    return report;
}

std::string audit_report_to_json(const AuditReport& report) {
    json obj;
    obj["counting"] = "occurrences";
    obj["imbalance"] = report.imbalance;
    json tokens = json::array();
    for (const TokenCount& tc : report.tokens) {
        json t;
        t["token"] = tc.token;
        t["correct"] = tc.correct;
        t["wrong"] = tc.wrong;
        tokens.push_back(std::move(t));
    }
    obj["tokens"] = std::move(tokens);
    return obj.dump(2);
}

}  // namespace copa
