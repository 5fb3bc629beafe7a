#include "gamlab/bpe.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <queue>

namespace gamlab {

namespace {

uint64_t pair_key(int l, int r) {
    return (static_cast<uint64_t>(static_cast<uint32_t>(l)) << 32) | static_cast<uint32_t>(r);
}

struct HeapEntry {
    int64_t count;
    int left, right;
};
struct HeapLess {
    // Max-heap on count; ties prefer the smaller (left, right) pair.
    bool operator()(const HeapEntry& a, const HeapEntry& b) const {
        if (a.count != b.count) return a.count < b.count;
        if (a.left != b.left) return a.left > b.left;
        return a.right > b.right;
    }
};

BpeVocab base_vocab() {
    BpeVocab v;
    v.id_to_token.reserve(BpeVocab::kBaseSize);
    for (int b = 0; b < BpeVocab::kBaseSize; ++b) {
        std::string tok(1, static_cast<char>(static_cast<unsigned char>(b)));
        v.token_to_id.emplace(tok, b);
        v.id_to_token.push_back(std::move(tok));
    }
    return v;
}

constexpr char kHexDigits[] = "0123456789abcdef";

std::string to_hex(const std::string& bytes) {
    std::string out;
    out.reserve(bytes.size() * 2);
    for (unsigned char c : bytes) {
        out.push_back(kHexDigits[c >> 4]);
        out.push_back(kHexDigits[c & 0xf]);
    }
    return out;
}

std::string from_hex(const std::string& hex) {
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        return -1;
    };
    if (hex.size() % 2 != 0) throw ParseError("vocab file: odd-length hex token");
    std::string out;
    out.reserve(hex.size() / 2);
    for (size_t i = 0; i < hex.size(); i += 2) {
        int hi = nibble(hex[i]);
        int lo = nibble(hex[i + 1]);
        if (hi < 0 || lo < 0)
            throw ParseError(str_cat("vocab file: bad hex token at offset ", i));
        out.push_back(static_cast<char>((hi << 4) | lo));
    }
    return out;
}

} // namespace

BpeVocab bpe_train(const std::string& corpus, int vocab_size) {
    if (vocab_size < BpeVocab::kBaseSize + 1)
        throw ConfigError(str_cat("bpe_train: vocab_size must be >= ", BpeVocab::kBaseSize + 1,
                                  ", got ", vocab_size));
    if (corpus.empty()) throw InputError("bpe_train: corpus is empty");

    BpeVocab vocab = base_vocab();

    // Symbol chain over the corpus as doubly linked arrays.
    const int64_t n = static_cast<int64_t>(corpus.size());
    std::vector<int32_t> sym(static_cast<size_t>(n));
    std::vector<int64_t> prev(static_cast<size_t>(n)), next(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
        sym[static_cast<size_t>(i)] = static_cast<unsigned char>(corpus[static_cast<size_t>(i)]);
        prev[static_cast<size_t>(i)] = i - 1;
        next[static_cast<size_t>(i)] = i + 1 < n ? i + 1 : -1;
    }

    std::unordered_map<uint64_t, int64_t> counts;
    std::unordered_map<uint64_t, std::vector<int64_t>> where;  // left positions, lazily valid
    counts.reserve(static_cast<size_t>(n / 2));
    for (int64_t i = 0; i + 1 < n; ++i) {
        uint64_t key = pair_key(sym[static_cast<size_t>(i)], sym[static_cast<size_t>(i + 1)]);
        ++counts[key];
        where[key].push_back(i);
    }

    std::priority_queue<HeapEntry, std::vector<HeapEntry>, HeapLess> heap;
    for (const auto& [key, count] : counts)
        heap.push({count, static_cast<int>(key >> 32), static_cast<int>(key & 0xffffffffu)});

    auto bump = [&](int l, int r, int64_t delta, int64_t pos_hint) {
        uint64_t key = pair_key(l, r);
        int64_t& c = counts[key];
        c += delta;
        if (delta > 0) {
            where[key].push_back(pos_hint);
            heap.push({c, l, r});
        }
    };

    while (vocab.size() < vocab_size) {
        // Pop until an entry matches the live count for its pair.
        int left = -1, right = -1;
        int64_t count = 0;
        while (!heap.empty()) {
            HeapEntry e = heap.top();
            heap.pop();
            auto it = counts.find(pair_key(e.left, e.right));
            int64_t live = it == counts.end() ? 0 : it->second;
            if (live <= 0) continue;
            if (live != e.count) {
                heap.push({live, e.left, e.right});
                continue;
            }
            left = e.left;
            right = e.right;
            count = live;
            break;
        }
        // A pair seen once yields a token that can never recur; stop there.
        if (left < 0 || count < 2) {
            std::cerr << "bpe_train: corpus exhausted at vocab size " << vocab.size() << " (requested "
                      << vocab_size << ")\n";
            break;
        }

        const int new_id = vocab.size();
        vocab.merges.emplace_back(left, right);
        std::string tok = vocab.id_to_token[static_cast<size_t>(left)] +
                          vocab.id_to_token[static_cast<size_t>(right)];
        vocab.token_to_id.emplace(tok, new_id);
        vocab.id_to_token.push_back(std::move(tok));

        // Apply the merge left to right; stale or overlapping positions are
        // skipped by revalidating the chain.
        uint64_t key = pair_key(left, right);
        std::vector<int64_t> positions = std::move(where[key]);
        std::sort(positions.begin(), positions.end());
        where.erase(key);
        counts.erase(key);
        for (int64_t pos : positions) {
            if (sym[static_cast<size_t>(pos)] != left) continue;
            int64_t rpos = next[static_cast<size_t>(pos)];
            if (rpos < 0 || sym[static_cast<size_t>(rpos)] != right) continue;

            int64_t lpos = prev[static_cast<size_t>(pos)];
            int64_t rrpos = next[static_cast<size_t>(rpos)];
            if (lpos >= 0) bump(sym[static_cast<size_t>(lpos)], left, -1, 0);
            if (rrpos >= 0) bump(right, sym[static_cast<size_t>(rrpos)], -1, 0);

            sym[static_cast<size_t>(pos)] = new_id;
            next[static_cast<size_t>(pos)] = rrpos;
            if (rrpos >= 0) prev[static_cast<size_t>(rrpos)] = pos;
            sym[static_cast<size_t>(rpos)] = -1;  // consumed

            if (lpos >= 0) bump(sym[static_cast<size_t>(lpos)], new_id, +1, lpos);
            if (rrpos >= 0) bump(new_id, sym[static_cast<size_t>(rrpos)], +1, pos);
        }
    }
    return vocab;
}

std::vector<int32_t> bpe_encode(const BpeVocab& v, const std::string& text) {
    std::vector<int32_t> out;
    if (text.empty()) return out;

    const int64_t n = static_cast<int64_t>(text.size());
    std::vector<int32_t> sym(static_cast<size_t>(n));
    std::vector<int64_t> prev(static_cast<size_t>(n)), next(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
        sym[static_cast<size_t>(i)] = static_cast<unsigned char>(text[static_cast<size_t>(i)]);
        prev[static_cast<size_t>(i)] = i - 1;
        next[static_cast<size_t>(i)] = i + 1 < n ? i + 1 : -1;
    }

    std::unordered_map<uint64_t, int> rank;
    rank.reserve(v.merges.size());
    for (size_t i = 0; i < v.merges.size(); ++i)
        rank.emplace(pair_key(v.merges[i].first, v.merges[i].second), static_cast<int>(i));

    // (merge rank, left position); lowest rank first, leftmost on ties.
    struct Cand {
        int r;
        int64_t pos;
    };
    struct CandLess {
        bool operator()(const Cand& a, const Cand& b) const {
            if (a.r != b.r) return a.r > b.r;
            return a.pos > b.pos;
        }
    };
    std::priority_queue<Cand, std::vector<Cand>, CandLess> heap;
    auto push_cand = [&](int64_t pos) {
        int64_t rpos = next[static_cast<size_t>(pos)];
        if (rpos < 0) return;
        auto it = rank.find(pair_key(sym[static_cast<size_t>(pos)], sym[static_cast<size_t>(rpos)]));
        if (it != rank.end()) heap.push({it->second, pos});
    };
    for (int64_t i = 0; i + 1 < n; ++i) push_cand(i);

    while (!heap.empty()) {
        Cand c = heap.top();
        heap.pop();
        int64_t pos = c.pos;
        if (sym[static_cast<size_t>(pos)] < 0) continue;
        int64_t rpos = next[static_cast<size_t>(pos)];
        if (rpos < 0) continue;
        auto it = rank.find(pair_key(sym[static_cast<size_t>(pos)], sym[static_cast<size_t>(rpos)]));
        if (it == rank.end() || it->second != c.r) continue;  // stale entry

        sym[static_cast<size_t>(pos)] = BpeVocab::kBaseSize + c.r;
        int64_t rrpos = next[static_cast<size_t>(rpos)];
        next[static_cast<size_t>(pos)] = rrpos;
        if (rrpos >= 0) prev[static_cast<size_t>(rrpos)] = pos;
        sym[static_cast<size_t>(rpos)] = -1;

        int64_t lpos = prev[static_cast<size_t>(pos)];
        if (lpos >= 0) push_cand(lpos);
        push_cand(pos);
    }

    for (int64_t i = 0; i >= 0; i = next[static_cast<size_t>(i)])
        if (sym[static_cast<size_t>(i)] >= 0) out.push_back(sym[static_cast<size_t>(i)]);
    return out;
}

std::string bpe_decode(const BpeVocab& v, const std::vector<int32_t>& ids) {
    std::string out;
    for (int32_t id : ids) {
        if (id < 0 || id >= v.size())
            throw IndexError(str_cat("bpe_decode: id ", id, " out of range [0, ", v.size(), ")"));
        out += v.id_to_token[static_cast<size_t>(id)];
    }
    return out;
}

void bpe_save(const BpeVocab& v, const std::string& path) {
    nlohmann::json j;
    j["version"] = 1;
    auto& vocab = j["vocab"] = nlohmann::json::array();
    for (const auto& tok : v.id_to_token) vocab.push_back(to_hex(tok));
    auto& merges = j["merges"] = nlohmann::json::array();
    for (const auto& [l, r] : v.merges) merges.push_back(nlohmann::json::array({l, r}));

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(str_cat("cannot open for writing: ", path));
    out << j.dump(1, '\t') << "\n";
    if (!out) throw IoError(str_cat("write failed: ", path));
}

BpeVocab bpe_load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(str_cat("cannot open: ", path));
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(str_cat("vocab file ", path, ": ", e.what()));
    }
    if (!j.is_object() || !j.contains("version") || !j.contains("vocab") || !j.contains("merges"))
        throw ParseError(str_cat("vocab file ", path, ": missing version/vocab/merges"));
    if (j["version"].get<int>() != 1)
        throw ParseError(str_cat("vocab file ", path, ": unsupported version"));

    BpeVocab v;
    for (const auto& tok : j["vocab"]) v.id_to_token.push_back(from_hex(tok.get<std::string>()));
    if (v.size() < BpeVocab::kBaseSize)
        throw ParseError(str_cat("vocab file ", path, ": fewer than 256 base tokens"));
    for (int i = 0; i < v.size(); ++i) v.token_to_id.emplace(v.id_to_token[static_cast<size_t>(i)], i);
    for (const auto& m : j["merges"]) {
        if (!m.is_array() || m.size() != 2)
            throw ParseError(str_cat("vocab file ", path, ": malformed merge entry"));
        v.merges.emplace_back(m[0].get<int>(), m[1].get<int>());
    }
    if (static_cast<int>(v.merges.size()) != v.size() - BpeVocab::kBaseSize)
        throw ParseError(str_cat("vocab file ", path, ": merge count does not match vocab size"));
    // Every non-base token must reconstruct from its merge pair.
    for (size_t i = 0; i < v.merges.size(); ++i) {
        const auto& [l, r] = v.merges[i];
        int id = BpeVocab::kBaseSize + static_cast<int>(i);
        if (l < 0 || r < 0 || l >= id || r >= id)
            throw ParseError(str_cat("vocab file ", path, ": merge ", i, " references invalid ids"));
        if (v.id_to_token[static_cast<size_t>(l)] + v.id_to_token[static_cast<size_t>(r)] !=
            v.id_to_token[static_cast<size_t>(id)])
            throw ParseError(str_cat("vocab file ", path, ": merge ", i,
                                     " does not reconstruct its token"));
    }
    return v;
}

} // namespace gamlab
