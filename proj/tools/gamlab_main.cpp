// gamlab: tokenizer training, LM training/eval with ablation variants, and
// the sequence-length scaling benchmark, in one executable.
//
// Exit codes: 0 success, 1 runtime/I-O failure, 2 usage error.
#include "gamlab/bench.hpp"
#include "gamlab/bpe.hpp"
#include "gamlab/checkpoint.hpp"
#include "gamlab/train.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/sha.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace {

using nlohmann::json;

std::string sha256_hex(const std::string& s) {
    unsigned char digest[SHA256_DIGEST_LENGTH];
    SHA256(reinterpret_cast<const unsigned char*>(s.data()), s.size(), digest);
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * SHA256_DIGEST_LENGTH);
    for (unsigned char c : digest) {
        out.push_back(hex[c >> 4]);
        out.push_back(hex[c & 0xf]);
    }
    return out;
}

void reject_unknown_keys(const json& j, std::initializer_list<const char*> known,
                         const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : known) ok = ok || it.key() == k;
        if (!ok)
            throw gamlab::ConfigError(gamlab::str_cat("config: unknown key '", it.key(), "' in ",
                                                      where));
    }
}

struct RunConfig {
    gamlab::ModelConfig model;
    gamlab::TrainConfig train;
    std::string train_path, val_path, vocab_path, cache_dir;
    std::string out_dir = "run";
};

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw gamlab::IoError(gamlab::str_cat("cannot open config: ", path));
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw gamlab::ParseError(gamlab::str_cat("config ", path, ": ", e.what()));
    }
    reject_unknown_keys(j, {"model", "train", "data", "out_dir"}, "top level");

    RunConfig rc;
    if (j.contains("model")) rc.model = gamlab::model_config_from_json(j["model"].dump());
    if (j.contains("train")) {
        const json& t = j["train"];
        reject_unknown_keys(t,
                            {"lr_peak", "beta1", "beta2", "weight_decay", "adam_eps",
                             "warmup_steps", "epochs", "batch_size", "clip_norm", "seed"},
                            "train");
        auto& c = rc.train;
        if (t.contains("lr_peak")) c.lr_peak = t["lr_peak"].get<double>();
        if (t.contains("beta1")) c.beta1 = t["beta1"].get<double>();
        if (t.contains("beta2")) c.beta2 = t["beta2"].get<double>();
        if (t.contains("weight_decay")) c.weight_decay = t["weight_decay"].get<double>();
        if (t.contains("adam_eps")) c.adam_eps = t["adam_eps"].get<double>();
        if (t.contains("warmup_steps")) c.warmup_steps = t["warmup_steps"].get<int64_t>();
        if (t.contains("epochs")) c.epochs = t["epochs"].get<int64_t>();
        if (t.contains("batch_size")) c.batch_size = t["batch_size"].get<int64_t>();
        if (t.contains("clip_norm")) c.clip_norm = t["clip_norm"].get<double>();
        if (t.contains("seed")) c.seed = t["seed"].get<uint64_t>();
    }
    if (j.contains("data")) {
        const json& d = j["data"];
        reject_unknown_keys(d, {"train", "val", "vocab", "cache_dir"}, "data");
        if (d.contains("train")) rc.train_path = d["train"].get<std::string>();
        if (d.contains("val")) rc.val_path = d["val"].get<std::string>();
        if (d.contains("vocab")) rc.vocab_path = d["vocab"].get<std::string>();
        if (d.contains("cache_dir")) rc.cache_dir = d["cache_dir"].get<std::string>();
    }
    if (j.contains("out_dir")) rc.out_dir = j["out_dir"].get<std::string>();
    return rc;
}

bool looks_like_token_cache(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return false;
    char magic[8] = {};
    in.read(magic, sizeof(magic));
    return in && std::memcmp(magic, "GAMTOK01", 8) == 0;
}

// Encode a corpus split, via the cache when configured and present.
std::vector<int32_t> tokens_for_split(const RunConfig& rc, const gamlab::BpeVocab& vocab,
                                      const std::string& split_path, const std::string& split_name) {
    std::string cache_path;
    if (!rc.cache_dir.empty()) {
        std::filesystem::create_directories(rc.cache_dir);
        cache_path = gamlab::str_cat(rc.cache_dir, "/", split_name, ".v", vocab.size(), ".tokens");
        if (std::filesystem::exists(cache_path)) {
            std::cerr << "using token cache " << cache_path << "\n";
            return gamlab::load_token_cache(cache_path);
        }
    }
    gamlab::CorpusStats stats;
    std::string text = gamlab::load_corpus(split_path, &stats);
    std::cerr << split_name << ": " << stats.bytes << " bytes in " << stats.files << " file(s)\n";
    std::vector<int32_t> toks = gamlab::bpe_encode(vocab, text);
    if (!cache_path.empty()) gamlab::save_token_cache(cache_path, toks);
    return toks;
}

json metrics_to_json(const std::vector<gamlab::MetricsRow>& rows) {
    json out = json::array();
    for (const auto& r : rows)
        out.push_back({{"epoch", r.epoch},
                       {"train_loss", r.train_loss},
                       {"val_loss", r.val_loss},
                       {"val_ppl", r.val_ppl},
                       {"epoch_seconds", r.epoch_seconds}});
    return out;
}

int cmd_tokenizer_train(const std::vector<std::string>& corpus_paths, int vocab_size,
                        const std::string& out_path) {
    std::string corpus;
    size_t total_bytes = 0;
    for (size_t i = 0; i < corpus_paths.size(); ++i) {
        gamlab::CorpusStats stats;
        if (i) corpus += '\n';
        corpus += gamlab::load_corpus(corpus_paths[i], &stats);
        total_bytes = corpus.size();
    }
    gamlab::BpeVocab vocab = gamlab::bpe_train(corpus, vocab_size);
    gamlab::bpe_save(vocab, out_path);
    std::cout << "vocab_size=" << vocab.size() << " corpus_bytes=" << total_bytes << "\n";
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& arch_flag,
              const std::string& variant_flag, int64_t seed_flag, bool have_seed) {
    if (!variant_flag.empty() && arch_flag == "transformer")
        throw CLI::ValidationError("--variant only applies to --arch gam");
    RunConfig rc = load_run_config(config_path);
    if (!arch_flag.empty()) rc.model.arch = gamlab::arch_from_name(arch_flag);
    if (!variant_flag.empty()) {
        if (rc.model.arch == gamlab::Arch::Transformer)
            throw CLI::ValidationError("--variant only applies to --arch gam");
        rc.model.variant = gamlab::variant_from_name(variant_flag);
    }
    if (have_seed) {
        rc.model.seed = static_cast<uint64_t>(seed_flag);
        rc.train.seed = static_cast<uint64_t>(seed_flag);
    }
    if (rc.train_path.empty() || rc.val_path.empty() || rc.vocab_path.empty())
        throw gamlab::ConfigError("config: data.train, data.val and data.vocab are required");

    gamlab::BpeVocab vocab = gamlab::bpe_load(rc.vocab_path);
    if (vocab.size() != rc.model.vocab_size) {
        std::cerr << "note: model vocab_size " << rc.model.vocab_size << " adjusted to tokenizer size "
                  << vocab.size() << "\n";
        rc.model.vocab_size = vocab.size();
    }

    gamlab::TokenDataset train_ds =
        gamlab::chunk_tokens(tokens_for_split(rc, vocab, rc.train_path, "train"), rc.model.block_size);
    gamlab::TokenDataset val_ds =
        gamlab::chunk_tokens(tokens_for_split(rc, vocab, rc.val_path, "val"), rc.model.block_size);
    if (train_ds.dropped_tail_tokens() > 0)
        std::cerr << "train: dropped " << train_ds.dropped_tail_tokens() << " tail tokens\n";

    gamlab::LmModel<float> model(rc.model);
    const int64_t n_params = model.count_params();
    std::cerr << "model: " << gamlab::arch_name(rc.model.arch);
    if (rc.model.arch == gamlab::Arch::Gam) std::cerr << " (" << variant_name(rc.model.variant) << ")";
    std::cerr << ", " << n_params << " parameters\n";

    std::filesystem::create_directories(rc.out_dir);
    const std::string config_echo = gamlab::model_config_to_json(rc.model);
    {
        json manifest;
        manifest["config"] = json::parse(config_echo);
        manifest["train"] = {{"lr_peak", rc.train.lr_peak},
                             {"beta1", rc.train.beta1},
                             {"beta2", rc.train.beta2},
                             {"weight_decay", rc.train.weight_decay},
                             {"adam_eps", rc.train.adam_eps},
                             {"warmup_steps", rc.train.warmup_steps},
                             {"epochs", rc.train.epochs},
                             {"batch_size", rc.train.batch_size},
                             {"clip_norm", rc.train.clip_norm},
                             {"seed", rc.train.seed}};
        manifest["param_count"] = n_params;
        manifest["config_hash"] = sha256_hex(config_echo);
        std::ofstream mf(rc.out_dir + "/manifest.json");
        if (!mf) throw gamlab::IoError(gamlab::str_cat("cannot write manifest in ", rc.out_dir));
        mf << manifest.dump(1, '\t') << "\n";
    }

    gamlab::TrainResult result = gamlab::train(model, train_ds, val_ds, rc.train, rc.out_dir);
    {
        // Re-emit the manifest with final metrics attached.
        std::ifstream mf_in(rc.out_dir + "/manifest.json");
        json manifest = json::parse(mf_in);
        manifest["metrics"] = metrics_to_json(result.metrics);
        std::ofstream mf(rc.out_dir + "/manifest.json");
        mf << manifest.dump(1, '\t') << "\n";
    }
    std::cout << "best_val_loss=" << result.best_val_loss
              << " best_val_ppl=" << std::exp(result.best_val_loss) << " out_dir=" << rc.out_dir
              << "\n";
    return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data_path,
             const std::string& vocab_path, int64_t batch_size) {
    gamlab::LmModel<float> model = gamlab::load_checkpoint(ckpt_path);
    std::vector<int32_t> tokens;
    if (looks_like_token_cache(data_path)) {
        tokens = gamlab::load_token_cache(data_path);
    } else {
        if (vocab_path.empty())
            throw gamlab::ConfigError("eval: --vocab is required when --data is raw text");
        gamlab::BpeVocab vocab = gamlab::bpe_load(vocab_path);
        tokens = gamlab::bpe_encode(vocab, gamlab::load_corpus(data_path));
    }
    gamlab::TokenDataset ds = gamlab::chunk_tokens(std::move(tokens), model.config().block_size);
    gamlab::EvalResult r = gamlab::evaluate(model, ds, batch_size);
    std::cout << "val_loss=" << r.loss << " val_ppl=" << r.ppl << "\n";
    return 0;
}

int cmd_bench(const std::string& archs_csv, const std::string& seq_lens_csv,
              const gamlab::BenchConfig& cfg, const std::string& out_dir) {
    std::vector<gamlab::Arch> archs;
    {
        std::stringstream ss(archs_csv);
        std::string item;
        while (std::getline(ss, item, ',')) archs.push_back(gamlab::arch_from_name(item));
    }
    std::vector<int64_t> seq_lens;
    {
        std::stringstream ss(seq_lens_csv);
        std::string item;
        while (std::getline(ss, item, ','))
            seq_lens.push_back(static_cast<int64_t>(std::stoll(item)));
    }
    if (archs.empty() || seq_lens.empty())
        throw CLI::ValidationError("bench: --archs and --seq-lens must be non-empty");
    gamlab::run_sweep(archs, seq_lens, cfg, out_dir);
    std::cout << "wrote " << out_dir << "/scaling.csv and " << out_dir << "/scaling.svg\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"gamlab: linear-time gated associative memory sequence models vs a causal "
                 "transformer baseline"};
    app.require_subcommand(1);

    // tokenizer-train
    auto* tok = app.add_subcommand("tokenizer-train", "train a byte-level BPE tokenizer");
    std::vector<std::string> corpus_paths;
    int vocab_size = 10000;
    std::string tok_out;
    tok->add_option("--corpus", corpus_paths, "corpus file(s) or directory(ies)")->required();
    tok->add_option("--vocab-size", vocab_size, "target vocabulary size")->capture_default_str();
    tok->add_option("--out", tok_out, "output vocab JSON path")->required();

    // train
    auto* tr = app.add_subcommand("train", "train a language model");
    std::string config_path, arch_flag, variant_flag;
    int64_t seed_flag = 0;
    tr->add_option("--config", config_path, "run config JSON")->required();
    tr->add_option("--arch", arch_flag, "gam|transformer (overrides config)");
    tr->add_option("--variant", variant_flag, "full|sum_fusion|global_only|local_only");
    auto* seed_opt = tr->add_option("--seed", seed_flag, "seed override (model init + training)");

    // eval
    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
    std::string ckpt_path, data_path, vocab_path;
    int64_t eval_batch = 32;
    ev->add_option("--checkpoint", ckpt_path, "checkpoint .gamc path")->required();
    ev->add_option("--data", data_path, "text file/dir or token cache")->required();
    ev->add_option("--vocab", vocab_path, "vocab JSON (needed for raw text)");
    ev->add_option("--batch-size", eval_batch, "eval batch size")->capture_default_str();

    // bench
    auto* be = app.add_subcommand("bench", "single-block scaling sweep");
    std::string archs_csv = "gam,transformer";
    std::string seq_lens_csv = "256,512,1024,2048,4096,8192";
    gamlab::BenchConfig bcfg;
    std::string bench_out = "bench";
    be->add_option("--archs", archs_csv, "comma list: gam,transformer")->capture_default_str();
    be->add_option("--seq-lens", seq_lens_csv, "comma list of sequence lengths")
        ->capture_default_str();
    be->add_option("--batch", bcfg.batch, "batch size")->capture_default_str();
    be->add_option("--d-model", bcfg.d_model, "embedding dimension")->capture_default_str();
    be->add_option("--num-slots", bcfg.num_slots, "GAM memory slots")->capture_default_str();
    be->add_option("--n-head", bcfg.n_head, "transformer heads")->capture_default_str();
    be->add_option("--iters", bcfg.iters, "measured iterations per point")->capture_default_str();
    be->add_option("--warmup", bcfg.warmup, "unmeasured warmup iterations")->capture_default_str();
    be->add_option("--out", bench_out, "output directory")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (app.got_subcommand(tok)) return cmd_tokenizer_train(corpus_paths, vocab_size, tok_out);
        if (app.got_subcommand(tr))
            return cmd_train(config_path, arch_flag, variant_flag, seed_flag, seed_opt->count() > 0);
        if (app.got_subcommand(ev)) return cmd_eval(ckpt_path, data_path, vocab_path, eval_batch);
        if (app.got_subcommand(be)) return cmd_bench(archs_csv, seq_lens_csv, bcfg, bench_out);
    } catch (const CLI::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
