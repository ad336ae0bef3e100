#include "mcnn/tokenizer.hpp"

#include <cctype>

#include "json.hpp"
#include "mcnn/layers.hpp"

namespace mcnn {

bool is_accepted_residue(char c) {
    switch (c) {
        case 'A': case 'C': case 'D': case 'E': case 'F': case 'G': case 'H':
        case 'I': case 'K': case 'L': case 'M': case 'N': case 'P': case 'Q':
        case 'R': case 'S': case 'T': case 'V': case 'W': case 'Y':
        case 'B': case 'J': case 'X': case 'Z':
            return true;
        default:
            return false;
    }
}

std::string normalize_sequence(const std::string& seq) {
    std::string out;
    out.reserve(seq.size());
    for (std::size_t i = 0; i < seq.size(); ++i) {
        char c = static_cast<char>(std::toupper(static_cast<unsigned char>(seq[i])));
        if (c == '*' || c == '-') continue;
        if (!is_accepted_residue(c))
            throw AlphabetError("illegal character '" + std::string(1, seq[i]) +
                                "' at offset " + std::to_string(i));
        out.push_back(c);
    }
    return out;
}

std::vector<std::string> extract_ngrams(const std::string& seq, std::size_t n) {
    for (std::size_t i = 0; i < seq.size(); ++i)
        if (!is_accepted_residue(seq[i]))
            throw AlphabetError("illegal character '" + std::string(1, seq[i]) +
                                "' at offset " + std::to_string(i));
    if (seq.size() < n)
        throw SequenceTooShortError("sequence length " + std::to_string(seq.size()) +
                                    " shorter than n-gram size " + std::to_string(n));
    std::vector<std::string> out;
    out.reserve(seq.size() - n + 1);
    for (std::size_t i = 0; i + n <= seq.size(); ++i) out.push_back(seq.substr(i, n));
    return out;
}

TrigramVocab TrigramVocab::build(const std::vector<std::vector<std::string>>& corpus,
                                 std::size_t n) {
    if (corpus.empty()) throw ContractError("build_vocab: empty corpus");
    TrigramVocab v;
    v.n_ = n;
    for (const auto& tokens : corpus)
        for (const auto& tok : tokens) {
            if (tok.size() != n)
                throw ContractError("build_vocab: token '" + tok + "' has length " +
                                    std::to_string(tok.size()) + ", expected " +
                                    std::to_string(n));
            if (v.token_to_id_.emplace(tok, static_cast<int>(v.tokens_.size() + kReserved))
                    .second)
                v.tokens_.push_back(tok);
        }
    return v;
}

int TrigramVocab::id_of(const std::string& token) const {
    auto it = token_to_id_.find(token);
    return it == token_to_id_.end() ? kUnkId : it->second;
}

const std::string& TrigramVocab::token_of(int id) const {
    static const std::string kPad = "<pad>";
    static const std::string kUnk = "<unk>";
    if (id == kPadId) return kPad;
    if (id == kUnkId) return kUnk;
    const std::size_t idx = static_cast<std::size_t>(id) - kReserved;
    if (id < 0 || idx >= tokens_.size())
        throw VocabError("id " + std::to_string(id) + " out of range");
    return tokens_[idx];
}

std::vector<int> TrigramVocab::encode(const std::vector<std::string>& tokens,
                                      std::size_t max_len) const {
    if (max_len < 1) throw ContractError("encode: max_len must be >= 1");
    std::vector<int> out(max_len, kPadId);
    const std::size_t m = std::min(tokens.size(), max_len);
    for (std::size_t i = 0; i < m; ++i) out[i] = id_of(tokens[i]);
    return out;
}

std::vector<std::string> TrigramVocab::decode(const std::vector<int>& ids) const {
    std::vector<std::string> out;
    for (int id : ids) {
        if (id == kPadId) continue;
        out.push_back(token_of(id));
    }
    return out;
}

std::string TrigramVocab::to_json() const {
    nlohmann::json j;
    j["version"] = 1;
    j["n"] = n_;
    j["tokens"] = tokens_;
    return j.dump();
}

TrigramVocab TrigramVocab::from_json(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(std::string("vocab json: ") + e.what());
    }
    if (!j.contains("version") || j["version"].get<int>() != 1)
        throw DataError("vocab json: unsupported version");
    TrigramVocab v;
    v.n_ = j.at("n").get<std::size_t>();
    for (const auto& tok : j.at("tokens")) {
        std::string t = tok.get<std::string>();
        v.token_to_id_.emplace(t, static_cast<int>(v.tokens_.size() + kReserved));
        v.tokens_.push_back(std::move(t));
    }
    return v;
}

std::uint64_t TrigramVocab::content_hash() const {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](char c) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    };
    for (const auto& tok : tokens_) {
        for (char c : tok) mix(c);
        mix('\n');
    }
    return h;
}

}  // namespace mcnn
