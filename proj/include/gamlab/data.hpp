// Corpus ingestion, fixed-length chunking and shuffled batch iteration.
#pragma once

#include "gamlab/common.hpp"
#include "gamlab/tensor.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace gamlab {

struct CorpusStats {
    size_t files = 0;
    size_t bytes = 0;  // including separators
};

// Reads one file, or every regular file under a directory in sorted-path
// order, concatenated with a single '\n' between documents.
std::string load_corpus(const std::string& path, CorpusStats* stats = nullptr);

// Non-overlapping chunks of block_size + 1 tokens (input N plus the shifted
// target); the tail remainder is dropped.
struct TokenDataset {
    std::vector<int32_t> tokens;
    int64_t block_size = 0;

    int64_t chunk_count() const {
        return (static_cast<int64_t>(tokens.size()) - 1) / block_size;
    }
    int64_t dropped_tail_tokens() const {
        return static_cast<int64_t>(tokens.size()) - (chunk_count() * block_size + 1);
    }
};

TokenDataset chunk_tokens(std::vector<int32_t> tokens, int64_t block_size);

// Serves (B, block_size + 1) batches over a deterministic permutation of
// chunk indices; the permutation depends only on (seed, epoch).
class BatchIter {
public:
    BatchIter(const TokenDataset& ds, int64_t batch_size, bool shuffle, uint64_t seed,
              int64_t epoch, bool drop_last);

    // False when the epoch is exhausted.
    bool next(IntTensor& out);

    int64_t batches() const;

private:
    const TokenDataset& ds_;
    std::vector<int64_t> order_;
    int64_t batch_size_;
    int64_t cursor_ = 0;
    bool drop_last_;
};

// Pre-tokenized cache: 8-byte magic, u64 count, then count u32 little-endian
// ids.
void save_token_cache(const std::string& path, const std::vector<int32_t>& tokens);
std::vector<int32_t> load_token_cache(const std::string& path);

} // namespace gamlab
