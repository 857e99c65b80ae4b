#include "copa/model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>

#include <json.hpp>

namespace copa {

using json = nlohmann::ordered_json;

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::string current;
    auto flush = [&] {
        if (!current.empty()) {
            tokens.push_back(current);
            current.clear();
        }
    };
    for (size_t i = 0; i < text.size(); ++i) {
        unsigned char c = static_cast<unsigned char>(text[i]);
        if (c < 0x80) {
            if (std::isspace(c)) {
                flush();
            } else if (std::ispunct(c)) {
                flush();
                tokens.push_back(std::string(1, static_cast<char>(c)));
            } else {
                current.push_back(static_cast<char>(std::tolower(c)));
            }
        } else {
            // Multi-byte UTF-8 sequence: keep as-is inside the current token.
            current.push_back(static_cast<char>(c));
        }
    }
    flush();
    return tokens;
}

Vocab::Vocab() {
    add("[UNK]");
    add("[SEP]");
    add("[MASK]");
}

void Vocab::add(const std::string& token) {
    auto [it, inserted] = token_to_id_.emplace(token, static_cast<int>(id_to_token_.size()));
    if (!inserted) throw std::runtime_error("Vocab::add: duplicate token \"" + token + "\"");
    id_to_token_.push_back(token);
}

int Vocab::lookup(const std::string& token) const {
    auto it = token_to_id_.find(token);
    return it == token_to_id_.end() ? kUnk : it->second;
}

Vocab build_vocab(const std::vector<Instance>& corpus, int min_count) {
    if (corpus.empty()) throw std::runtime_error("build_vocab: empty corpus");
    if (min_count < 1) throw std::runtime_error("build_vocab: min_count must be >= 1");
    std::map<std::string, long> freq;
    auto count = [&](const std::string& text) {
        for (const std::string& tok : tokenize(text)) ++freq[tok];
    };
    for (const Instance& inst : corpus) {
        count(inst.premise);
        for (const std::string& alt : inst.alternatives) count(alt);
    }
    std::vector<std::pair<std::string, long>> entries(freq.begin(), freq.end());
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    Vocab vocab;
    for (const auto& [tok, n] : entries) {
        if (n >= min_count) vocab.add(tok);
    }
    return vocab;
}

ModelParams ModelParams::init(int vocab_size, int d, SplitMix64& rng) {
    auto fill_mat = [&](int rows, int cols) {
        Mat m(rows, Vec(cols));
        for (auto& row : m)
            for (double& x : row) x = rng.next_double(-0.1, 0.1);
        return m;
    };
    ModelParams p;
    p.d = d;
    p.E = fill_mat(vocab_size, d);
    p.S = fill_mat(2, d);
    p.W1 = fill_mat(d, d);
    p.b1.resize(d);
    for (double& x : p.b1) x = rng.next_double(-0.1, 0.1);
    p.w_out.resize(d);
    for (double& x : p.w_out) x = rng.next_double(-0.1, 0.1);
    p.b_out = rng.next_double(-0.1, 0.1);
    // MASK keeps a zero embedding so erasure measures pure information removal.
    std::fill(p.E[Vocab::kMask].begin(), p.E[Vocab::kMask].end(), 0.0);
    return p;
}

std::pair<std::string, std::string> arrange_inputs(const Instance& inst, int choice_index) {
    if (choice_index < 0 || choice_index >= static_cast<int>(inst.alternatives.size())) {
        throw std::out_of_range("arrange_inputs: choice index out of range");
    }
    bool alt_is_cause;
    if (inst.arrangement_override) {
        alt_is_cause = *inst.arrangement_override == Arrangement::as_cause;
    } else {
        alt_is_cause = inst.ask_for == AskFor::cause;
    }
    const std::string& alt = inst.alternatives[choice_index];
    if (alt_is_cause) return {alt, inst.premise};
    return {inst.premise, alt};
}

ForwardCache encode_ids_cached(const std::vector<int>& token_ids,
                               const std::vector<int>& segments,
                               const ModelParams& params) {
    if (token_ids.empty()) throw std::runtime_error("encode: empty token sequence");
    int d = params.d;
    ForwardCache cache;
    cache.token_ids = token_ids;
    cache.segments = segments;
    cache.meanpool.assign(d, 0.0);
    for (size_t t = 0; t < token_ids.size(); ++t) {
        const Vec& e = params.E[token_ids[t]];
        const Vec& s = params.S[segments[t]];
        for (int k = 0; k < d; ++k) cache.meanpool[k] += e[k] + s[k];
    }
    double inv_n = 1.0 / static_cast<double>(token_ids.size());
    for (int k = 0; k < d; ++k) cache.meanpool[k] *= inv_n;
    cache.pre_activation.assign(d, 0.0);
    for (int r = 0; r < d; ++r) {
        double acc = params.b1[r];
        const Vec& row = params.W1[r];
        for (int k = 0; k < d; ++k) acc += row[k] * cache.meanpool[k];
        cache.pre_activation[r] = acc;
    }
    cache.h.resize(d);
    for (int r = 0; r < d; ++r) cache.h[r] = std::max(0.0, cache.pre_activation[r]);
    return cache;
}

namespace {

void append_tokens(const std::string& text, int segment, const Vocab& vocab,
                   std::vector<int>& ids, std::vector<int>& segments) {
    for (const std::string& tok : tokenize(text)) {
        ids.push_back(vocab.lookup(tok));
        segments.push_back(segment);
    }
}

}  // namespace

ForwardCache encode_pair_cached(const std::string& cause_text,
                                const std::string& effect_text,
                                const ModelParams& params, const Vocab& vocab) {
    std::vector<int> ids;
    std::vector<int> segments;
    append_tokens(cause_text, 0, vocab, ids, segments);
    ids.push_back(Vocab::kSep);  // SEP belongs to segment 0
    segments.push_back(0);
    append_tokens(effect_text, 1, vocab, ids, segments);
    if (ids.size() == 1) {
        throw std::runtime_error("encode_pair: both texts tokenize to empty");
    }
    return encode_ids_cached(ids, segments, params);
}

Vec encode_pair(const std::string& cause_text, const std::string& effect_text,
                const ModelParams& params, const Vocab& vocab) {
    return encode_pair_cached(cause_text, effect_text, params, vocab).h;
}

double score(const Vec& h, const ModelParams& params) {
    double z = params.b_out;
    for (int k = 0; k < params.d; ++k) z += params.w_out[k] * h[k];
    return z;
}

double choice_logit(const Instance& inst, int choice_index, const ModelParams& params,
                    const Vocab& vocab, bool reversed) {
    auto [cause_text, effect_text] = arrange_inputs(inst, choice_index);
    if (reversed) std::swap(cause_text, effect_text);
    return score(encode_pair(cause_text, effect_text, params, vocab), params);
}

int predict(const Instance& inst, const ModelParams& params, const Vocab& vocab) {
    int best = 0;
    double best_z = choice_logit(inst, 0, params, vocab);
    for (int i = 1; i < static_cast<int>(inst.alternatives.size()); ++i) {
        double z = choice_logit(inst, i, params, vocab);
        if (z > best_z) {
            best = i;
            best_z = z;
        }
    }
    return best;
}

double lexical_similarity_score(const std::string& premise, const std::string& alternative) {
    std::vector<std::string> a = tokenize(premise);
    std::vector<std::string> b = tokenize(alternative);
    std::set<std::string> sa(a.begin(), a.end());
    std::set<std::string> sb(b.begin(), b.end());
    if (sa.empty() && sb.empty()) return 0.0;
    size_t inter = 0;
    for (const std::string& t : sa) inter += sb.count(t);
    size_t uni = sa.size() + sb.size() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

void save_model(const ModelParams& params, const Vocab& vocab, const std::string& path) {
    json obj;
    obj["version"] = 1;
    obj["d"] = params.d;
    obj["vocab"] = vocab.tokens();
    obj["E"] = params.E;
    obj["S"] = params.S;
    obj["W1"] = params.W1;
    obj["b1"] = params.b1;
    obj["w_out"] = params.w_out;
    obj["b_out"] = params.b_out;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write model file: " + path);
    out << obj.dump();
    out << "\n";
}

std::pair<ModelParams, Vocab> load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open model file: " + path);
    json obj = json::parse(in);
    if (obj.value("version", 0) != 1) {
        throw std::runtime_error("unsupported model file version in " + path);
    }
    ModelParams p;
    p.d = obj.at("d").get<int>();
    p.E = obj.at("E").get<Mat>();
    p.S = obj.at("S").get<Mat>();
    p.W1 = obj.at("W1").get<Mat>();
    p.b1 = obj.at("b1").get<Vec>();
    p.w_out = obj.at("w_out").get<Vec>();
    p.b_out = obj.at("b_out").get<double>();
    std::vector<std::string> tokens = obj.at("vocab").get<std::vector<std::string>>();
    Vocab vocab;
    for (size_t i = 3; i < tokens.size(); ++i) vocab.add(tokens[i]);
    if (static_cast<int>(tokens.size()) != vocab.size() ||
        static_cast<int>(p.E.size()) != vocab.size()) {
        throw std::runtime_error("model file vocab/embedding size mismatch in " + path);
    }
    return {std::move(p), std::move(vocab)};
}

}  // namespace copa
