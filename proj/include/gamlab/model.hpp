// Full language model: token + learned positional embeddings, a stack of
// GAM or Transformer blocks, final layer norm, and an LM head tied to the
// token embedding.
#pragma once

#include "gamlab/gam.hpp"
#include "gamlab/transformer.hpp"

#include <string>
#include <vector>

namespace gamlab {

enum class Arch { Gam, Transformer };

inline std::string arch_name(Arch a) { return a == Arch::Gam ? "gam" : "transformer"; }
inline Arch arch_from_name(const std::string& s) {
    if (s == "gam") return Arch::Gam;
    if (s == "transformer") return Arch::Transformer;
    throw ConfigError(str_cat("unknown arch: '", s, "' (expected gam|transformer)"));
}

struct ModelConfig {
    Arch arch = Arch::Gam;
    GamVariant variant = GamVariant::Full;  // GAM only
    int64_t vocab_size = 10000;
    int64_t block_size = 256;  // maximum sequence length
    int64_t d_model = 512;
    int64_t n_layers = 6;
    int64_t num_slots = 512;
    int64_t kernel_size = 3;
    int64_t n_head = 8;
    double dropout = 0.1;
    uint64_t seed = 0;

    void validate() const {
        if (vocab_size < 1 || block_size < 1 || d_model < 1 || n_layers < 1 || num_slots < 1 ||
            kernel_size < 1 || n_head < 1)
            throw ConfigError("model config: all dimensions must be positive");
        if (arch == Arch::Transformer && d_model % n_head != 0)
            throw ConfigError(str_cat("model config: d_model ", d_model,
                                      " not divisible by n_head ", n_head));
        if (dropout < 0.0 || dropout >= 1.0)
            throw ConfigError("model config: dropout must be in [0, 1)");
    }
};

// Named handle to one trainable tensor; `decay` marks participation in
// weight decay (biases and layer-norm parameters are excluded).
template <typename T>
struct ParamRef {
    std::string name;
    Tensor<T> tensor;
    bool decay = true;
};

template <typename T>
struct ModelParams {
    Tensor<T> token_embedding;     // (V, d), doubles as the LM head (tied)
    Tensor<T> position_embedding;  // (N_max, d)
    std::vector<GamBlockParams<T>> gam_blocks;
    std::vector<TransformerBlockParams<T>> tfm_blocks;
    LayerNormParams<T> final_ln;
};

template <typename T>
class LmModel {
public:
    LmModel() = default;

    explicit LmModel(const ModelConfig& cfg) : cfg_(cfg) {
        cfg.validate();
        Xoshiro256 rng(derive_seed(cfg.seed, /*tag=*/0x6d6f64656cULL));
        p_.token_embedding = normal_init<T>({cfg.vocab_size, cfg.d_model}, 0.0, 0.02, rng);
        p_.token_embedding.set_requires_grad(true);
        p_.position_embedding = normal_init<T>({cfg.block_size, cfg.d_model}, 0.0, 0.02, rng);
        p_.position_embedding.set_requires_grad(true);
        for (int64_t l = 0; l < cfg.n_layers; ++l) {
            if (cfg.arch == Arch::Gam)
                p_.gam_blocks.push_back(
                    make_gam_block<T>(cfg.d_model, cfg.num_slots, cfg.kernel_size, cfg.variant, rng));
            else
                p_.tfm_blocks.push_back(make_transformer_block<T>(cfg.d_model, cfg.n_head, rng));
        }
        p_.final_ln = make_layer_norm<T>(cfg.d_model);
    }

    const ModelConfig& config() const { return cfg_; }
    ModelParams<T>& params() { return p_; }
    const ModelParams<T>& params() const { return p_; }

    // logits (B, N, V). Train mode draws dropout masks from `rng`.
    Tensor<T> forward(const IntTensor& ids, Mode mode, Xoshiro256& rng) const {
        if (ids.shape.size() != 2)
            throw ShapeError("model forward: ids must be (B, N)");
        const int64_t N = ids.shape[1];
        if (N > cfg_.block_size)
            throw ConfigError(str_cat("model forward: sequence length ", N,
                                      " exceeds block size ", cfg_.block_size));
        Tensor<T> tok = embedding_lookup(p_.token_embedding, ids);
        Tensor<T> pos = (N == cfg_.block_size)
                            ? p_.position_embedding
                            : narrow(p_.position_embedding, 0, 0, N);
        Tensor<T> h = dropout(add(tok, pos), cfg_.dropout, mode, rng);
        for (size_t l = 0; l < std::max(p_.gam_blocks.size(), p_.tfm_blocks.size()); ++l) {
            if (cfg_.arch == Arch::Gam)
                h = gam_block_forward(p_.gam_blocks[l], cfg_.variant, h, cfg_.dropout, mode, rng);
            else
                h = transformer_block_forward(p_.tfm_blocks[l], h, cfg_.dropout, mode, rng);
        }
        h = layer_norm(p_.final_ln, h);
        return matmul_nt(h, p_.token_embedding);  // tied head
    }

    // Next-token loss over a (B, N+1) chunk: inputs ids[:, :N], targets ids[:, 1:].
    Tensor<T> loss(const IntTensor& chunk, Mode mode, Xoshiro256& rng) const {
        if (chunk.shape.size() != 2 || chunk.shape[1] < 2)
            throw ShapeError("model loss: chunk must be (B, N+1) with N >= 1");
        const int64_t B = chunk.shape[0];
        const int64_t N = chunk.shape[1] - 1;
        IntTensor inputs{{B, N}, std::vector<int32_t>(static_cast<size_t>(B * N))};
        IntTensor targets{{B, N}, std::vector<int32_t>(static_cast<size_t>(B * N))};
        for (int64_t b = 0; b < B; ++b) {
            const int32_t* row = chunk.data.data() + b * (N + 1);
            std::copy(row, row + N, inputs.data.begin() + b * N);
            std::copy(row + 1, row + N + 1, targets.data.begin() + b * N);
        }
        return cross_entropy(forward(inputs, mode, rng), targets);
    }

    // Greedy decoding: appends argmax of the last-position logits n_new times.
    std::vector<int32_t> generate_greedy(const std::vector<int32_t>& prompt, int64_t n_new) const {
        if (prompt.empty()) throw InputError("generate: prompt must be non-empty");
        if (static_cast<int64_t>(prompt.size()) + n_new > cfg_.block_size)
            throw ConfigError(str_cat("generate: prompt length ", prompt.size(), " + ", n_new,
                                      " new tokens exceeds block size ", cfg_.block_size));
        std::vector<int32_t> ids = prompt;
        Xoshiro256 rng(0);  // unused in Eval mode
        for (int64_t s = 0; s < n_new; ++s) {
            IntTensor in{{1, static_cast<int64_t>(ids.size())}, ids};
            Tensor<T> logits = forward(in, Mode::Eval, rng);
            const int64_t V = logits.dim(2);
            const T* last = logits.data() + (logits.numel() - V);
            int32_t best = 0;
            for (int64_t v = 1; v < V; ++v)
                if (last[v] > last[best]) best = static_cast<int32_t>(v);
            ids.push_back(best);
        }
        return ids;
    }

    // Canonical parameter traversal: names are stable and define the
    // checkpoint record order. The tied LM head is not a separate entry.
    std::vector<ParamRef<T>> parameters() {
        std::vector<ParamRef<T>> out;
        out.push_back({"token_embedding", p_.token_embedding, true});
        out.push_back({"position_embedding", p_.position_embedding, true});
        for (size_t l = 0; l < p_.gam_blocks.size(); ++l) {
            auto& b = p_.gam_blocks[l];
            const std::string pre = str_cat("blocks.", l, ".");
            if (b.conv_weight.defined()) {
                out.push_back({pre + "conv_weight", b.conv_weight, true});
                out.push_back({pre + "conv_bias", b.conv_bias, false});
            }
            if (b.memory.defined()) out.push_back({pre + "memory", b.memory, true});
            if (b.gate.weight.defined()) {
                out.push_back({pre + "gate.weight", b.gate.weight, true});
                out.push_back({pre + "gate.bias", b.gate.bias, false});
            }
            push_linear(out, pre + "ffn_in", b.ffn_in);
            push_linear(out, pre + "ffn_out", b.ffn_out);
            push_ln(out, pre + "ln1", b.ln1);
            push_ln(out, pre + "ln2", b.ln2);
        }
        for (size_t l = 0; l < p_.tfm_blocks.size(); ++l) {
            auto& b = p_.tfm_blocks[l];
            const std::string pre = str_cat("blocks.", l, ".");
            push_linear(out, pre + "wq", b.wq);
            push_linear(out, pre + "wk", b.wk);
            push_linear(out, pre + "wv", b.wv);
            push_linear(out, pre + "wo", b.wo);
            push_linear(out, pre + "ffn_in", b.ffn_in);
            push_linear(out, pre + "ffn_out", b.ffn_out);
            push_ln(out, pre + "ln1", b.ln1);
            push_ln(out, pre + "ln2", b.ln2);
        }
        push_ln(out, "final_ln", p_.final_ln);
        return out;
    }

    // Exact count of distinct trainable scalars (tied head counted once).
    int64_t count_params() {
        int64_t n = 0;
        for (const auto& p : parameters()) n += p.tensor.numel();
        return n;
    }

private:
    static void push_linear(std::vector<ParamRef<T>>& out, const std::string& name,
                            LinearParams<T>& p) {
        out.push_back({name + ".weight", p.weight, true});
        if (p.bias.defined()) out.push_back({name + ".bias", p.bias, false});
    }
    static void push_ln(std::vector<ParamRef<T>>& out, const std::string& name,
                        LayerNormParams<T>& p) {
        out.push_back({name + ".scale", p.scale, false});
        out.push_back({name + ".shift", p.shift, false});
    }

    ModelConfig cfg_;
    ModelParams<T> p_;
};

// Closed-form parameter count for a config (matches LmModel::count_params).
inline int64_t expected_param_count(const ModelConfig& cfg) {
    int64_t per_block = cfg.arch == Arch::Gam
                            ? gam_block_param_count(cfg.d_model, cfg.num_slots, cfg.kernel_size,
                                                    cfg.variant)
                            : transformer_block_param_count(cfg.d_model);
    return cfg.vocab_size * cfg.d_model      // token embedding == LM head (tied)
           + cfg.block_size * cfg.d_model    // positions
           + cfg.n_layers * per_block        //
           + 2 * cfg.d_model;                // final layer norm
}

} // namespace gamlab
