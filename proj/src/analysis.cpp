#include "copa/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "copa/training.hpp"

namespace copa {

namespace {

// Log-probability of the gold label given the two choice logits.
double gold_log_likelihood(double z_gold, double z_other) {
    double m = std::max(z_gold, z_other);
    double lse = m + std::log(std::exp(z_gold - m) + std::exp(z_other - m));
    return z_gold - lse;
}

}  // namespace

ImportanceProfile erasure_importance(const ModelParams& params, const Vocab& vocab,
                                     const Instance& inst) {
    if (inst.alternatives.size() != 2) {
        throw std::runtime_error("erasure_importance: instance \"" + inst.id +
                                 "\" is not binary");
    }
    int other = 1 - inst.gold;
    double z_other = choice_logit(inst, other, params, vocab);

    // Token sequence of the gold pair, remembering where the gold
    // alternative's tokens sit.
    auto [cause_text, effect_text] = arrange_inputs(inst, inst.gold);
    const std::string& gold_text = inst.alternatives[inst.gold];
    bool alt_first = inst.arrangement_override
                         ? *inst.arrangement_override == Arrangement::as_cause
                         : inst.ask_for == AskFor::cause;
    std::vector<std::string> cause_toks = tokenize(cause_text);
    std::vector<std::string> effect_toks = tokenize(effect_text);
    if ((alt_first ? cause_toks : effect_toks).empty()) {
        throw std::runtime_error("erasure_importance: gold alternative of \"" + inst.id +
                                 "\" tokenizes to empty");
    }
    std::vector<int> ids;
    std::vector<int> segments;
    for (const std::string& t : cause_toks) {
        ids.push_back(vocab.lookup(t));
        segments.push_back(0);
    }
    ids.push_back(Vocab::kSep);
    segments.push_back(0);
    for (const std::string& t : effect_toks) {
        ids.push_back(vocab.lookup(t));
        segments.push_back(1);
    }
    size_t alt_begin = alt_first ? 0 : cause_toks.size() + 1;
    const std::vector<std::string>& alt_toks = alt_first ? cause_toks : effect_toks;

    double z_gold = score(encode_ids_cached(ids, segments, params).h, params);
    double ll0 = gold_log_likelihood(z_gold, z_other);

    ImportanceProfile profile;
    profile.instance_id = inst.id;
    profile.gold_text = gold_text;
    for (size_t t = 0; t < alt_toks.size(); ++t) {
        std::vector<int> masked = ids;
        masked[alt_begin + t] = Vocab::kMask;
        double z_masked = score(encode_ids_cached(masked, segments, params).h, params);
        double ll_t = gold_log_likelihood(z_masked, z_other);
        TokenImportance ti;
        ti.token = alt_toks[t];
        ti.position = static_cast<int>(t);
        ti.score = (ll0 - ll_t) / std::abs(ll0);
        profile.tokens.push_back(std::move(ti));
    }
    return profile;
}

void RatingsMatrix::check() const {
    if (item_ids.empty()) throw CorpusError("ratings: need at least 1 item");
    if (item_ids.size() != labels.size()) {
        throw CorpusError("ratings: item_ids/labels row count mismatch");
    }
    size_t raters = labels.front().size();
    if (raters < 2) throw CorpusError("ratings: need at least 2 raters");
    for (size_t i = 0; i < labels.size(); ++i) {
        if (labels[i].size() != raters) {
            throw CorpusError("ratings: item \"" + item_ids[i] +
                                     "\" has a different rater count");
        }
        for (const std::string& cell : labels[i]) {
            if (cell.empty()) {
                throw CorpusError("ratings: empty cell for item \"" + item_ids[i] +
                                         "\"");
            }
        }
    }
}

RatingsMatrix load_ratings_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CorpusError("cannot open ratings file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw CorpusError("ratings file is empty: " + path);
    auto split = [](const std::string& s) {
        std::vector<std::string> cells;
        std::stringstream ss(s);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (!s.empty() && s.back() == ',') cells.push_back("");
        return cells;
    };
    std::vector<std::string> header = split(line);
    if (header.empty() || header[0] != "item_id") {
        throw CorpusError("ratings header must start with item_id: " + path);
    }
    size_t raters = header.size() - 1;
    RatingsMatrix m;
    size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells = split(line);
        if (cells.size() != raters + 1) {
            throw CorpusError("ratings line " + std::to_string(line_no) +
                                     ": expected " + std::to_string(raters + 1) +
                                     " columns");
        }
        m.item_ids.push_back(cells[0]);
        m.labels.emplace_back(cells.begin() + 1, cells.end());
    }
    m.check();
    return m;
}

double fleiss_kappa(const RatingsMatrix& ratings) {
    ratings.check();
    size_t n = ratings.labels.front().size();  // raters per item
    size_t items = ratings.labels.size();

    std::map<std::string, size_t> category_totals;
    double p_bar = 0.0;
    for (const auto& row : ratings.labels) {
        std::map<std::string, size_t> counts;
        for (const std::string& label : row) {
            ++counts[label];
            ++category_totals[label];
        }
        double sum_sq = 0.0;
        for (const auto& [label, c] : counts) sum_sq += static_cast<double>(c) * c;
        p_bar += (sum_sq - static_cast<double>(n)) /
                 (static_cast<double>(n) * static_cast<double>(n - 1));
    }
    p_bar /= static_cast<double>(items);

    double total = static_cast<double>(items) * static_cast<double>(n);
    double p_e = 0.0;
    for (const auto& [label, c] : category_totals) {
        double p = static_cast<double>(c) / total;
        p_e += p * p;
    }
    if (1.0 - p_e == 0.0) {
        throw DegenerateMarginalError(
            "fleiss_kappa: a single category is used everywhere; kappa is undefined");
    }
    return (p_bar - p_e) / (1.0 - p_e);
}

MajorityVoteResult majority_vote(const RatingsMatrix& ratings) {
    ratings.check();
    MajorityVoteResult result;
    for (const auto& row : ratings.labels) {
        std::map<std::string, size_t> counts;
        for (const std::string& label : row) ++counts[label];
        size_t best = 0;
        bool tie = false;
        std::string winner;
        for (const auto& [label, c] : counts) {
            if (c > best) {
                best = c;
                winner = label;
                tie = false;
            } else if (c == best) {
                tie = true;
            }
        }
        if (tie) {
            result.winners.push_back(std::nullopt);
            ++result.unresolved;
        } else {
            result.winners.push_back(winner);
        }
    }
    return result;
}

void export_importance_csv(const std::vector<ImportanceProfile>& profiles,
                           const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write importance file: " + path);
    out << "instance_id,position,token,score\n";
    char buf[64];
    for (const ImportanceProfile& p : profiles) {
        for (const TokenImportance& ti : p.tokens) {
            std::snprintf(buf, sizeof(buf), "%.6f", ti.score);
            out << p.instance_id << "," << ti.position << "," << ti.token << "," << buf
                << "\n";
        }
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

int representative_run(const MultiSeedSummary& summary) {
    if (!summary.metric_mean) return -1;
    double mean = *summary.metric_mean;
    int best = -1;
    double best_dist = 0.0;
    for (size_t i = 0; i < summary.runs.size(); ++i) {
        if (summary.runs[i].degenerate) continue;
        double dist = std::abs(summary.metrics[i] - mean);
        if (best < 0 || dist < best_dist ||
            (dist == best_dist && summary.runs[i].seed < summary.runs[best].seed)) {
            best = static_cast<int>(i);
            best_dist = dist;
        }
    }
    return best;
}

}  // namespace copa
