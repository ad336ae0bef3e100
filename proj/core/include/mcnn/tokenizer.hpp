#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "mcnn/errors.hpp"

namespace mcnn {

// 20 standard residues plus the ambiguity codes B/J/X/Z seen in real data.
bool is_accepted_residue(char c);

// Uppercases and strips stop '*' and gap '-' symbols; rejects anything
// outside the accepted alphabet with the offending offset.
std::string normalize_sequence(const std::string& seq);

// Overlapping windows of length n, stride 1, original order.
std::vector<std::string> extract_ngrams(const std::string& seq, std::size_t n);

/// Bijection between observed n-grams and contiguous ids >= 2.
/// Id 0 is padding, id 1 is unknown.
class TrigramVocab {
public:
    static constexpr std::size_t kReserved = 2;

    TrigramVocab() = default;

    static TrigramVocab build(const std::vector<std::vector<std::string>>& corpus,
                              std::size_t n = 3);

    std::size_t n() const { return n_; }
    std::size_t size() const { return tokens_.size() + kReserved; }  // incl. reserved

    int id_of(const std::string& token) const;  // kUnkId when unseen
    const std::string& token_of(int id) const;

    std::vector<int> encode(const std::vector<std::string>& tokens,
                            std::size_t max_len) const;
    std::vector<std::string> decode(const std::vector<int>& ids) const;

    std::string to_json() const;
    static TrigramVocab from_json(const std::string& json_text);

    // FNV-1a over the token list, for checkpoint integrity checks.
    std::uint64_t content_hash() const;

private:
    std::size_t n_ = 3;
    std::vector<std::string> tokens_;  // index i <-> id i + kReserved
    std::unordered_map<std::string, int> token_to_id_;
};

}  // namespace mcnn
