// GPT-style decoder block: causal multi-head self-attention plus FFN, used
// as the quadratic-complexity baseline. The (N, N) attention map is
// materialized deliberately; the scaling benchmark measures exactly that.
#pragma once

#include "gamlab/nn.hpp"

namespace gamlab {

template <typename T>
struct TransformerBlockParams {
    LinearParams<T> wq, wk, wv, wo;   // d -> d each
    LinearParams<T> ffn_in, ffn_out;  // d -> 4d, 4d -> d
    LayerNormParams<T> ln1, ln2;
    int64_t n_head = 1;
};

template <typename T>
TransformerBlockParams<T> make_transformer_block(int64_t d, int64_t n_head, Xoshiro256& rng) {
    if (n_head < 1 || d % n_head != 0)
        throw ConfigError(str_cat("transformer block: d_model ", d, " not divisible by n_head ",
                                  n_head));
    TransformerBlockParams<T> p;
    p.wq = make_linear<T>(d, d, rng);
    p.wk = make_linear<T>(d, d, rng);
    p.wv = make_linear<T>(d, d, rng);
    p.wo = make_linear<T>(d, d, rng);
    p.ffn_in = make_linear<T>(d, 4 * d, rng);
    p.ffn_out = make_linear<T>(4 * d, d, rng);
    p.ln1 = make_layer_norm<T>(d);
    p.ln2 = make_layer_norm<T>(d);
    p.n_head = n_head;
    return p;
}

// Per head: A = causal_softmax(Q K^T / sqrt(head_dim)); out = concat(A V) Wo.
// Attention dropout is applied to the post-softmax weights in Train mode.
template <typename T>
Tensor<T> causal_mha(const TransformerBlockParams<T>& p, const Tensor<T>& x, double dropout_rate,
                     Mode mode, Xoshiro256& rng) {
    if (x.rank() != 3) throw ShapeError("causal_mha: input must be (B, N, d)");
    const int64_t B = x.dim(0), N = x.dim(1), d = x.dim(2);
    const int64_t H = p.n_head;
    if (d % H != 0) throw ConfigError(str_cat("causal_mha: d ", d, " not divisible by n_head ", H));
    const int64_t hd = d / H;

    auto split_heads = [&](const Tensor<T>& t) {
        // (B, N, d) -> (B, H, N, hd)
        return permute(reshape(t, {B, N, H, hd}), {0, 2, 1, 3});
    };
    Tensor<T> q = split_heads(linear(p.wq, x));
    Tensor<T> k = split_heads(linear(p.wk, x));
    Tensor<T> v = split_heads(linear(p.wv, x));

    Tensor<T> scores = scale(matmul_nt(q, k), static_cast<T>(1.0 / std::sqrt(static_cast<double>(hd))));
    Tensor<T> attn = softmax_causal(scores);
    attn = dropout(attn, dropout_rate, mode, rng);
    Tensor<T> ctx = matmul(attn, v);  // (B, H, N, hd)
    Tensor<T> merged = reshape(permute(ctx, {0, 2, 1, 3}), {B, N, d});
    return linear(p.wo, merged);
}

// Same pre-norm residual structure as the GAM block, with attention in
// place of the fused context.
template <typename T>
Tensor<T> transformer_block_forward(const TransformerBlockParams<T>& p, const Tensor<T>& x,
                                    double dropout_rate, Mode mode, Xoshiro256& rng) {
    Tensor<T> h = layer_norm(p.ln1, x);
    Tensor<T> y1 = add(x, dropout(causal_mha(p, h, dropout_rate, mode, rng), dropout_rate, mode, rng));
    Tensor<T> ffn = linear(p.ffn_out, gelu(linear(p.ffn_in, layer_norm(p.ln2, y1))));
    return add(y1, dropout(ffn, dropout_rate, mode, rng));
}

inline int64_t transformer_block_param_count(int64_t d) {
    int64_t count = 4 * (d * d + d);        // q, k, v, o
    count += d * 4 * d + 4 * d;             // ffn_in
    count += 4 * d * d + d;                 // ffn_out
    count += 4 * d;                         // two layer norms
    return count;
}

} // namespace gamlab
