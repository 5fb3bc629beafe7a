#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gamlab/bpe.hpp"
#include "gamlab/rng.hpp"
#include "support/test_util.hpp"

#include <fstream>

using namespace gamlab;

namespace {

// Random UTF-8 string: mixes ASCII, 2-, 3- and 4-byte code points.
std::string random_utf8(Xoshiro256& rng, int max_points = 40) {
    std::string s;
    const int n = 1 + static_cast<int>(rng.below(static_cast<uint64_t>(max_points)));
    for (int i = 0; i < n; ++i) {
        uint32_t cp = 0;
        switch (rng.below(4)) {
            case 0: cp = 1 + static_cast<uint32_t>(rng.below(0x7f)); break;
            case 1: cp = 0x80 + static_cast<uint32_t>(rng.below(0x800 - 0x80)); break;
            case 2:
                cp = 0x800 + static_cast<uint32_t>(rng.below(0xd800 - 0x800));
                break;  // below surrogates
            default: cp = 0x10000 + static_cast<uint32_t>(rng.below(0x10000)); break;
        }
        if (cp < 0x80) {
            s.push_back(static_cast<char>(cp));
        } else if (cp < 0x800) {
            s.push_back(static_cast<char>(0xc0 | (cp >> 6)));
            s.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
        } else if (cp < 0x10000) {
            s.push_back(static_cast<char>(0xe0 | (cp >> 12)));
            s.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
            s.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
        } else {
            s.push_back(static_cast<char>(0xf0 | (cp >> 18)));
            s.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3f)));
            s.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
            s.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
        }
    }
    return s;
}

const char* kSample =
    "the quick brown fox jumps over the lazy dog. the dog sleeps. "
    "a quick brown dog jumps over the lazy fox. the fox sleeps. ";

} // namespace

TEST_CASE("greedy training on 'aaaa'") {
    BpeVocab v = bpe_train("aaaa", 258);
    REQUIRE(v.merges.size() >= 1);
    CHECK(v.merges[0] == std::pair<int, int>{'a', 'a'});
    auto ids = bpe_encode(v, "aaaa");
    CHECK(ids.size() == 2);
    CHECK(bpe_decode(v, ids) == "aaaa");
}

TEST_CASE("vocab size boundaries") {
    CHECK_THROWS_AS(bpe_train("abc", 256), ConfigError);
    CHECK_THROWS_AS(bpe_train("", 300), InputError);
    BpeVocab one = bpe_train("abab", 257);
    CHECK(one.size() == 257);
    CHECK(one.merges.size() == 1);
}

TEST_CASE("requested size reached exactly on a rich corpus") {
    std::string corpus;
    for (int i = 0; i < 30; ++i) corpus += kSample;
    BpeVocab v = bpe_train(corpus, 300);
    CHECK(v.size() == 300);
    CHECK(v.merges.size() == 44);
}

TEST_CASE("too-small corpus stops at the maximum achievable size") {
    BpeVocab v = bpe_train("aaaa", 400);
    CHECK(v.size() < 400);
    CHECK(v.size() >= 257);
}

TEST_CASE("training determinism") {
    std::string corpus;
    for (int i = 0; i < 10; ++i) corpus += kSample;
    BpeVocab a = bpe_train(corpus, 280);
    BpeVocab b = bpe_train(corpus, 280);
    CHECK(a.merges == b.merges);
    CHECK(a.id_to_token == b.id_to_token);
}

TEST_CASE("encode basics") {
    BpeVocab v = bpe_train(kSample, 270);
    CHECK(bpe_encode(v, "").empty());
    // A byte outside any merge stays a base token.
    auto ids = bpe_encode(v, "\x07");
    REQUIRE(ids.size() == 1);
    CHECK(ids[0] == 7);
    CHECK(bpe_decode(v, {}) == "");
    for (int b = 0; b < 256; ++b)
        CHECK(bpe_decode(v, {b}) == std::string(1, static_cast<char>(b)));
    CHECK_THROWS_AS(bpe_decode(v, {100000}), IndexError);
}

TEST_CASE("round trip on 1000 random UTF-8 strings") {
    std::string corpus;
    for (int i = 0; i < 20; ++i) corpus += kSample;
    BpeVocab v = bpe_train(corpus, 400);
    Xoshiro256 rng(2024);
    for (int i = 0; i < 1000; ++i) {
        std::string s = random_utf8(rng);
        CHECK(bpe_decode(v, bpe_encode(v, s)) == s);
    }
}

TEST_CASE("encode matches training segmentation statistics") {
    // Encoding the training corpus must produce only valid ids and compress.
    std::string corpus;
    for (int i = 0; i < 20; ++i) corpus += kSample;
    BpeVocab v = bpe_train(corpus, 350);
    auto ids = bpe_encode(v, corpus);
    CHECK(ids.size() < corpus.size());
    for (int32_t id : ids) CHECK(id < v.size());
}

TEST_CASE("save/load round trip is structurally equal") {
    std::string dir = testing::scratch_dir("bpe");
    BpeVocab v = bpe_train(kSample, 280);
    bpe_save(v, dir + "/vocab.json");
    BpeVocab w = bpe_load(dir + "/vocab.json");
    CHECK(v.id_to_token == w.id_to_token);
    CHECK(v.merges == w.merges);
    CHECK(v.token_to_id.size() == w.token_to_id.size());
}

TEST_CASE("malformed vocab files raise parse errors") {
    std::string dir = testing::scratch_dir("bpe_bad");
    auto write = [&](const std::string& name, const std::string& content) {
        std::ofstream f(dir + "/" + name);
        f << content;
        return dir + "/" + name;
    };
    CHECK_THROWS_AS(bpe_load(dir + "/missing.json"), IoError);
    CHECK_THROWS_AS(bpe_load(write("garbage.json", "{not json")), ParseError);
    CHECK_THROWS_AS(bpe_load(write("empty.json", "{}")), ParseError);
    CHECK_THROWS_AS(bpe_load(write("badver.json", R"({"version":9,"vocab":[],"merges":[]})")),
                    ParseError);
}
