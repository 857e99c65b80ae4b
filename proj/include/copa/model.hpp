#pragma once

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "copa/corpus.hpp"
#include "copa/rng.hpp"

namespace copa {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;

// Unicode-preserving lowercasing tokenizer: whitespace split, ASCII
// punctuation split off as separate tokens.
std::vector<std::string> tokenize(const std::string& text);

// Token -> id map with reserved ids 0=UNK, 1=SEP, 2=MASK. Reserved tokens
// are never produced by tokenizing raw text (tokenization lowercases and
// splits brackets).
class Vocab {
public:
    static constexpr int kUnk = 0;
    static constexpr int kSep = 1;
    static constexpr int kMask = 2;

    Vocab();

    // Appends a token with the next id. Fails on duplicates.
    void add(const std::string& token);

    int lookup(const std::string& token) const;  // UNK for unknown tokens
    int size() const { return static_cast<int>(id_to_token_.size()); }
    const std::string& token(int id) const { return id_to_token_.at(id); }
    const std::vector<std::string>& tokens() const { return id_to_token_; }

private:
    std::vector<std::string> id_to_token_;
    std::unordered_map<std::string, int> token_to_id_;
};

Vocab build_vocab(const std::vector<Instance>& corpus, int min_count);

// All trainable tensors of the pair scorer.
struct ModelParams {
    int d = 0;     // embedding width
    Mat E;         // V x d token embeddings
    Mat S;         // 2 x d segment embeddings (cause slot / effect slot)
    Mat W1;        // d x d feed-forward weight
    Vec b1;        // d
    Vec w_out;     // d scoring head weight
    double b_out = 0.0;

    static ModelParams init(int vocab_size, int d, SplitMix64& rng);
};

// Intermediates of one encode_pair forward pass, kept for backprop.
struct ForwardCache {
    std::vector<int> token_ids;
    std::vector<int> segments;
    Vec meanpool;
    Vec pre_activation;  // W1 * meanpool + b1
    Vec h;
};

// Slot assignment for one choice: (cause_text, effect_text) per the
// question type, honoring arrangement_override when present.
std::pair<std::string, std::string> arrange_inputs(const Instance& inst, int choice_index);

// Token sequence tokenize(cause) ++ [SEP] ++ tokenize(effect); position
// vectors E[token] + S[segment] with SEP in segment 0; mean pool; one
// relu feed-forward layer.
Vec encode_pair(const std::string& cause_text, const std::string& effect_text,
                const ModelParams& params, const Vocab& vocab);
ForwardCache encode_pair_cached(const std::string& cause_text,
                                const std::string& effect_text,
                                const ModelParams& params, const Vocab& vocab);

// Forward pass over pre-resolved token ids (used by erasure probes).
ForwardCache encode_ids_cached(const std::vector<int>& token_ids,
                               const std::vector<int>& segments,
                               const ModelParams& params);

double score(const Vec& h, const ModelParams& params);

// Logit of one alternative; reversed swaps the cause/effect slots.
double choice_logit(const Instance& inst, int choice_index, const ModelParams& params,
                    const Vocab& vocab, bool reversed = false);

// Argmax over alternatives, ties broken toward the lower index.
int predict(const Instance& inst, const ModelParams& params, const Vocab& vocab);

// Jaccard similarity of token sets; 0 when both sets are empty.
double lexical_similarity_score(const std::string& premise, const std::string& alternative);

void save_model(const ModelParams& params, const Vocab& vocab, const std::string& path);
std::pair<ModelParams, Vocab> load_model(const std::string& path);

}  // namespace copa
