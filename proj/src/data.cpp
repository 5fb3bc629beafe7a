#include "gamlab/data.hpp"

#include "gamlab/rng.hpp"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace gamlab {

namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError(str_cat("cannot open: ", p.string()));
    std::string out((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError(str_cat("read failed: ", p.string()));
    return out;
}

constexpr char kTokenCacheMagic[8] = {'G', 'A', 'M', 'T', 'O', 'K', '0', '1'};

} // namespace

std::string load_corpus(const std::string& path, CorpusStats* stats) {
    fs::path p(path);
    if (!fs::exists(p)) throw IoError(str_cat("no such path: ", path));

    std::vector<fs::path> files;
    if (fs::is_directory(p)) {
        for (const auto& e : fs::directory_iterator(p))
            if (e.is_regular_file()) files.push_back(e.path());
        std::sort(files.begin(), files.end());
        if (files.empty()) throw InputError(str_cat("corpus directory is empty: ", path));
    } else {
        files.push_back(p);
    }

    std::string out;
    for (size_t i = 0; i < files.size(); ++i) {
        if (i) out += '\n';
        out += read_file(files[i]);
    }
    if (stats) {
        stats->files = files.size();
        stats->bytes = out.size();
    }
    return out;
}

TokenDataset chunk_tokens(std::vector<int32_t> tokens, int64_t block_size) {
    if (block_size < 1) throw ConfigError("chunk_tokens: block_size must be >= 1");
    if (static_cast<int64_t>(tokens.size()) < block_size + 1)
        throw InputError(str_cat("chunk_tokens: need at least ", block_size + 1, " tokens, got ",
                                 tokens.size()));
    return TokenDataset{std::move(tokens), block_size};
}

BatchIter::BatchIter(const TokenDataset& ds, int64_t batch_size, bool shuffle, uint64_t seed,
                     int64_t epoch, bool drop_last)
    : ds_(ds), batch_size_(batch_size), drop_last_(drop_last) {
    if (batch_size < 1) throw ConfigError("batch_iter: batch_size must be >= 1");
    const int64_t n = ds.chunk_count();
    order_.resize(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) order_[static_cast<size_t>(i)] = i;
    if (shuffle) {
        Xoshiro256 rng(derive_seed(seed, 0x73687566ULL + static_cast<uint64_t>(epoch)));
        for (int64_t i = n - 1; i > 0; --i) {
            int64_t j = static_cast<int64_t>(rng.below(static_cast<uint64_t>(i + 1)));
            std::swap(order_[static_cast<size_t>(i)], order_[static_cast<size_t>(j)]);
        }
    }
}

int64_t BatchIter::batches() const {
    const int64_t n = static_cast<int64_t>(order_.size());
    return drop_last_ ? n / batch_size_ : (n + batch_size_ - 1) / batch_size_;
}

bool BatchIter::next(IntTensor& out) {
    const int64_t n = static_cast<int64_t>(order_.size());
    const int64_t remaining = n - cursor_;
    if (remaining <= 0) return false;
    if (drop_last_ && remaining < batch_size_) return false;
    const int64_t b = std::min(batch_size_, remaining);
    const int64_t width = ds_.block_size + 1;

    out.shape = {b, width};
    out.data.resize(static_cast<size_t>(b * width));
    for (int64_t r = 0; r < b; ++r) {
        const int64_t chunk = order_[static_cast<size_t>(cursor_ + r)];
        const int32_t* src = ds_.tokens.data() + chunk * ds_.block_size;
        std::memcpy(out.data.data() + r * width, src, sizeof(int32_t) * static_cast<size_t>(width));
    }
    cursor_ += b;
    return true;
}

void save_token_cache(const std::string& path, const std::vector<int32_t>& tokens) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(str_cat("cannot open for writing: ", path));
    out.write(kTokenCacheMagic, sizeof(kTokenCacheMagic));
    uint64_t count = tokens.size();
    out.write(reinterpret_cast<const char*>(&count), sizeof(count));
    for (int32_t t : tokens) {
        uint32_t v = static_cast<uint32_t>(t);
        out.write(reinterpret_cast<const char*>(&v), sizeof(v));
    }
    if (!out) throw IoError(str_cat("write failed: ", path));
}

std::vector<int32_t> load_token_cache(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(str_cat("cannot open: ", path));
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kTokenCacheMagic, sizeof(magic)) != 0)
        throw ParseError(str_cat("token cache ", path, ": bad magic"));
    uint64_t count = 0;
    in.read(reinterpret_cast<char*>(&count), sizeof(count));
    if (!in) throw ParseError(str_cat("token cache ", path, ": truncated header"));
    std::vector<int32_t> tokens(count);
    in.read(reinterpret_cast<char*>(tokens.data()),
            static_cast<std::streamsize>(count * sizeof(uint32_t)));
    if (!in) throw ParseError(str_cat("token cache ", path, ": truncated id array"));
    return tokens;
}

} // namespace gamlab
