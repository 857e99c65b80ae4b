#pragma once

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace copa {

enum class AskFor { cause, effect };
enum class Arrangement { as_cause, as_effect };

std::string to_string(AskFor a);
std::string to_string(Arrangement a);

// One choice-of-alternatives question.
struct Instance {
    std::string id;
    std::string premise;
    AskFor ask_for = AskFor::cause;
    std::vector<std::string> alternatives;  // 2 or 3 candidates
    int gold = 0;                           // index of the correct alternative
    // Set only by the masking transform; overrides ask_for at arrangement time.
    std::optional<Arrangement> arrangement_override;
    std::vector<std::string> tags;
};

// A <premise, cause, effect> record, the source unit for balanced test sets.
struct Triplet {
    std::string id;
    std::string premise;
    std::string cause;
    std::string effect;
};

struct TokenCount {
    std::string token;
    long correct = 0;  // occurrences in gold alternatives
    long wrong = 0;    // occurrences in non-gold alternatives
};

// Per-token counts over gold vs non-gold alternatives, plus the scalar
// imbalance sum_t |c_t - w_t| / sum_t (c_t + w_t). Counts occurrences, not
// types; the serialized report carries that choice in its header.
struct AuditReport {
    double imbalance = 0.0;
    std::vector<TokenCount> tokens;  // sorted by |c-w| desc, ties lexicographic
};

// Data/file errors carry enough context to name the offending line or field.
class CorpusError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using Tokenizer = std::function<std::vector<std::string>(const std::string&)>;

std::vector<Instance> load_instances_jsonl(const std::string& path);
std::vector<Triplet> load_triplets_jsonl(const std::string& path);
void save_jsonl(const std::vector<Instance>& records, const std::string& path);
void save_jsonl(const std::vector<Triplet>& records, const std::string& path);

// Returns every violated invariant, not just the first. Empty means ok.
std::vector<std::string> validate(const Instance& inst, const Tokenizer& tokenizer);
std::vector<std::string> validate(const Triplet& t, const Tokenizer& tokenizer);

AuditReport token_distribution_audit(const std::vector<Instance>& dataset,
                                     const Tokenizer& tokenizer);

std::string audit_report_to_json(const AuditReport& report);

}  // namespace copa
