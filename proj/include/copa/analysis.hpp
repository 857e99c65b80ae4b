#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "copa/corpus.hpp"
#include "copa/model.hpp"
#include "copa/training.hpp"

namespace copa {

struct TokenImportance {
    std::string token;
    int position = 0;  // token position within the gold alternative
    double score = 0.0;
};

// Per-token relative log-likelihood change when that token of the gold
// alternative is replaced by MASK. Positive score = token supports the
// gold label.
struct ImportanceProfile {
    std::string instance_id;
    std::string gold_text;
    std::vector<TokenImportance> tokens;
};

ImportanceProfile erasure_importance(const ModelParams& params, const Vocab& vocab,
                                     const Instance& inst);

// items x raters categorical table; every cell filled.
struct RatingsMatrix {
    std::vector<std::string> item_ids;
    std::vector<std::vector<std::string>> labels;  // one row per item

    void check() const;  // throws on shape or empty-cell violations
};

RatingsMatrix load_ratings_csv(const std::string& path);

// Fleiss' kappa is undefined when every rating is one single category.
class DegenerateMarginalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

double fleiss_kappa(const RatingsMatrix& ratings);

struct MajorityVoteResult {
    std::vector<std::optional<std::string>> winners;  // nullopt = unresolved tie
    size_t unresolved = 0;
};

MajorityVoteResult majority_vote(const RatingsMatrix& ratings);

// CSV: instance_id,position,token,score with 6-decimal scores;
// byte-identical across re-exports.
void export_importance_csv(const std::vector<ImportanceProfile>& profiles,
                           const std::string& path);

// Reporting convention for error analysis: the non-degenerate run whose
// metric is nearest the non-degenerate mean, ties to the lower seed.
// Returns an index into summary.runs, or -1 when every run is degenerate.
int representative_run(const MultiSeedSummary& summary);

}  // namespace copa
