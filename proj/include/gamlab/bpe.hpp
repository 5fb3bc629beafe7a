// Byte-level BPE: 256 base byte tokens plus greedy most-frequent-pair
// merges. No pre-tokenization; merges may cross whitespace. Ties between
// equally frequent pairs break on the smaller (left, right) id pair, so
// training is deterministic.
#pragma once

#include "gamlab/common.hpp"

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace gamlab {

struct BpeVocab {
    static constexpr int kBaseSize = 256;

    std::vector<std::string> id_to_token;          // byte strings; [0,256) are single bytes
    std::unordered_map<std::string, int> token_to_id;
    std::vector<std::pair<int, int>> merges;       // merge i yields id 256 + i

    int size() const { return static_cast<int>(id_to_token.size()); }
};

// Greedy BPE training. A merge requires its pair to occur at least twice;
// if the corpus runs out before vocab_size tokens exist, training stops at
// the maximum achievable size with a stderr note.
BpeVocab bpe_train(const std::string& corpus, int vocab_size);

// Applies merges in learned priority order; any byte sequence is encodable.
std::vector<int32_t> bpe_encode(const BpeVocab& v, const std::string& text);

// Concatenation of token byte strings.
std::string bpe_decode(const BpeVocab& v, const std::vector<int32_t>& ids);

// JSON round trip: {"version": 1, "vocab": [hex, ...], "merges": [[l, r], ...]}.
void bpe_save(const BpeVocab& v, const std::string& path);
BpeVocab bpe_load(const std::string& path);

} // namespace gamlab
