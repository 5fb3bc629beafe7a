// The GAM block: a causal depthwise convolution over the local context, a
// parallel associative-memory retrieval over a learned slot bank for the
// global context, and a per-token sigmoid gate fusing the two, wrapped in a
// pre-norm residual pair with a standard FFN. Four variants cover the
// ablation grid: the full gated block, ungated sum fusion, and the two
// single-pathway reductions.
#pragma once

#include "gamlab/nn.hpp"

#include <string>

namespace gamlab {

enum class GamVariant { Full, SumFusion, GlobalOnly, LocalOnly };

inline std::string variant_name(GamVariant v) {
    switch (v) {
        case GamVariant::Full: return "full";
        case GamVariant::SumFusion: return "sum_fusion";
        case GamVariant::GlobalOnly: return "global_only";
        case GamVariant::LocalOnly: return "local_only";
    }
    return "?";
}

inline GamVariant variant_from_name(const std::string& s) {
    if (s == "full") return GamVariant::Full;
    if (s == "sum_fusion") return GamVariant::SumFusion;
    if (s == "global_only") return GamVariant::GlobalOnly;
    if (s == "local_only") return GamVariant::LocalOnly;
    throw ConfigError(str_cat("unknown GAM variant: '", s,
                              "' (expected full|sum_fusion|global_only|local_only)"));
}

template <typename T>
struct GamBlockParams {
    // Depthwise conv: one k-tap filter per channel. Absent in GlobalOnly.
    Tensor<T> conv_weight;  // (d, k)
    Tensor<T> conv_bias;    // (d)
    // Memory bank: num_slots rows of width d. Absent in LocalOnly.
    Tensor<T> memory;  // (S, d)
    // Gate projection d -> 2d. Present only in the Full variant.
    LinearParams<T> gate;
    LinearParams<T> ffn_in;   // d -> 4d
    LinearParams<T> ffn_out;  // 4d -> d
    LayerNormParams<T> ln1, ln2;
};

// Conv weights follow the 0.02-normal policy of the other projections;
// the memory bank is Xavier-uniform.
template <typename T>
GamBlockParams<T> make_gam_block(int64_t d, int64_t num_slots, int64_t kernel_size,
                                 GamVariant variant, Xoshiro256& rng) {
    if (kernel_size < 1) throw ConfigError("gam block: kernel_size must be >= 1");
    if (num_slots < 1) throw ConfigError("gam block: num_slots must be >= 1");
    GamBlockParams<T> p;
    if (variant != GamVariant::GlobalOnly) {
        p.conv_weight = normal_init<T>({d, kernel_size}, 0.0, 0.02, rng);
        p.conv_weight.set_requires_grad(true);
        p.conv_bias = Tensor<T>::zeros({d}, true);
    }
    if (variant != GamVariant::LocalOnly) {
        p.memory = xavier_uniform<T>({num_slots, d}, rng);
        p.memory.set_requires_grad(true);
    }
    if (variant == GamVariant::Full) {
        p.gate = make_linear<T>(d, 2 * d, rng);
    }
    p.ffn_in = make_linear<T>(d, 4 * d, rng);
    p.ffn_out = make_linear<T>(4 * d, d, rng);
    p.ln1 = make_layer_norm<T>(d);
    p.ln2 = make_layer_norm<T>(d);
    return p;
}

// y[b,t,c] = bias[c] + sum_i w[c,i] * x[b, t-(k-1)+i, c], zero left padding.
// Output position t depends only on inputs <= t.
template <typename T>
Tensor<T> causal_depthwise_conv1d(const Tensor<T>& weight, const Tensor<T>& bias,
                                  const Tensor<T>& x) {
    if (x.rank() != 3) throw ShapeError("causal_depthwise_conv1d: input must be (B, N, d)");
    const int64_t B = x.dim(0), N = x.dim(1), d = x.dim(2);
    if (weight.rank() != 2 || weight.dim(0) != d)
        throw ShapeError(str_cat("causal_depthwise_conv1d: weight ", shape_str(weight.shape()),
                                 " does not match ", d, " channels"));
    if (bias.dim(0) != d)
        throw ShapeError(str_cat("causal_depthwise_conv1d: bias ", shape_str(bias.shape()),
                                 " does not match ", d, " channels"));
    const int64_t k = weight.dim(1);

    Tensor<T> out = Tensor<T>::uninit(x.shape());
    const T* in = x.data();
    const T* w = weight.data();
    const T* bs = bias.data();
    T* o = out.data();
    parallel_for(B * N, [=](int64_t w0, int64_t w1) {
        for (int64_t bt = w0; bt < w1; ++bt) {
            const int64_t b = bt / N;
            const int64_t t = bt % N;
            T* orow = o + (b * N + t) * d;
            const int64_t i_lo = std::max<int64_t>(0, (k - 1) - t);
            for (int64_t c = 0; c < d; ++c) orow[c] = bs[c];
            for (int64_t i = i_lo; i < k; ++i) {
                const T* xrow = in + (b * N + t - (k - 1) + i) * d;
                for (int64_t c = 0; c < d; ++c) orow[c] += w[c * k + i] * xrow[c];
            }
        }
    });
    flops::add(2ull * static_cast<uint64_t>(B * N * d * k));

    Tensor<T> xv = x, wv = weight, bv = bias, ov = out;
    detail::maybe_record("causal_depthwise_conv1d", {x, weight, bias}, ov,
                         [xv, wv, bv, ov, B, N, d, k]() mutable {
        if (!ov.has_grad()) return;
        const T* g = ov.grad();
        if (xv.requires_grad()) {
            xv.ensure_grad();
            const T* w2 = wv.data();
            T* dx = xv.grad();
            // Disjoint writes per batch row.
            parallel_for(B, [=](int64_t b0, int64_t b1) {
                for (int64_t b = b0; b < b1; ++b) {
                    for (int64_t t = 0; t < N; ++t) {
                        const T* grow = g + (b * N + t) * d;
                        const int64_t i_lo = std::max<int64_t>(0, (k - 1) - t);
                        for (int64_t i = i_lo; i < k; ++i) {
                            T* dxrow = dx + (b * N + t - (k - 1) + i) * d;
                            for (int64_t c = 0; c < d; ++c) dxrow[c] += w2[c * k + i] * grow[c];
                        }
                    }
                }
            });
        }
        if (wv.requires_grad()) {
            wv.ensure_grad();
            const T* in2 = xv.data();
            T* dw = wv.grad();
            for (int64_t b = 0; b < B; ++b) {
                for (int64_t t = 0; t < N; ++t) {
                    const T* grow = g + (b * N + t) * d;
                    const int64_t i_lo = std::max<int64_t>(0, (k - 1) - t);
                    for (int64_t i = i_lo; i < k; ++i) {
                        const T* xrow = in2 + (b * N + t - (k - 1) + i) * d;
                        for (int64_t c = 0; c < d; ++c) dw[c * k + i] += grow[c] * xrow[c];
                    }
                }
            }
        }
        if (bv.requires_grad()) {
            bv.ensure_grad();
            T* db = bv.grad();
            for (int64_t bt = 0; bt < B * N; ++bt)
                detail::Kern<T>::axpy(T(1), g + bt * d, db, d);
        }
        flops::add(4ull * static_cast<uint64_t>(B * N * d * k));
    });
    return out;
}

template <typename T>
struct Retrieval {
    Tensor<T> global;   // (B, N, d) convex combination of memory rows
    Tensor<T> weights;  // (B, N, S) nonnegative rows summing to 1
};

// Scores = x . M^T, Weights = softmax over slots, Global = Weights . M.
// Runs for all positions in parallel; cost is linear in sequence length.
template <typename T>
Retrieval<T> memory_retrieve(const Tensor<T>& memory, const Tensor<T>& x) {
    if (memory.rank() != 2)
        throw ShapeError("memory_retrieve: memory bank must be (num_slots, d)");
    if (x.dim(x.rank() - 1) != memory.dim(1))
        throw ShapeError(str_cat("memory_retrieve: input width ", shape_str(x.shape()),
                                 " does not match memory ", shape_str(memory.shape())));
    Retrieval<T> r;
    Tensor<T> scores = matmul_nt(x, memory);
    r.weights = softmax_lastdim(scores);
    r.global = matmul(r.weights, memory);
    return r;
}

// FusedContext = sigmoid(g_local) * local + sigmoid(g_global) * global,
// where (g_local, g_global) are the halves of a single d -> 2d projection
// of the (normalized) block input.
template <typename T>
Tensor<T> gated_fusion(const LinearParams<T>& gate, const Tensor<T>& gate_input,
                       const Tensor<T>& local, const Tensor<T>& global) {
    const int64_t d = gate_input.dim(gate_input.rank() - 1);
    if (gate.out_dim() != 2 * d)
        throw ConfigError(str_cat("gated_fusion: gate must map d -> 2d, got ",
                                  shape_str(gate.weight.shape()), " for d = ", d));
    Tensor<T> g = linear(gate, gate_input);
    const int64_t axis = g.rank() - 1;
    Tensor<T> g_local = narrow(g, axis, 0, d);
    Tensor<T> g_global = narrow(g, axis, d, d);
    Tensor<T> fused = mul(sigmoid(g_local), local);
    return add(fused, mul(sigmoid(g_global), global));
}

// Pre-norm residual block:
//   h = LN1(x); local = conv(h); global = retrieve(M, h)
//   fused = gate(h) applied to the two paths (variant-dependent)
//   y1 = x + dropout(fused); y = y1 + dropout(FFN(LN2(y1)))
template <typename T>
Tensor<T> gam_block_forward(const GamBlockParams<T>& p, GamVariant variant, const Tensor<T>& x,
                            double dropout_rate, Mode mode, Xoshiro256& rng) {
    Tensor<T> h = layer_norm(p.ln1, x);

    Tensor<T> local, global;
    if (variant != GamVariant::GlobalOnly)
        local = causal_depthwise_conv1d(p.conv_weight, p.conv_bias, h);
    if (variant != GamVariant::LocalOnly)
        global = memory_retrieve(p.memory, h).global;

    Tensor<T> fused;
    switch (variant) {
        case GamVariant::Full: fused = gated_fusion(p.gate, h, local, global); break;
        case GamVariant::SumFusion: fused = add(local, global); break;
        case GamVariant::GlobalOnly: fused = global; break;
        case GamVariant::LocalOnly: fused = local; break;
    }

    Tensor<T> y1 = add(x, dropout(fused, dropout_rate, mode, rng));
    Tensor<T> ffn = linear(p.ffn_out, gelu(linear(p.ffn_in, layer_norm(p.ln2, y1))));
    return add(y1, dropout(ffn, dropout_rate, mode, rng));
}

// Trainable scalar count for one block at the given dims.
inline int64_t gam_block_param_count(int64_t d, int64_t num_slots, int64_t kernel_size,
                                     GamVariant variant) {
    int64_t count = 0;
    if (variant != GamVariant::GlobalOnly) count += d * kernel_size + d;
    if (variant != GamVariant::LocalOnly) count += num_slots * d;
    if (variant == GamVariant::Full) count += d * 2 * d + 2 * d;
    count += d * 4 * d + 4 * d;  // ffn_in
    count += 4 * d * d + d;      // ffn_out
    count += 4 * d;              // two layer norms
    return count;
}

} // namespace gamlab
