// Shared neural building blocks: linear, layer norm, embeddings, dropout,
// cross-entropy.
#pragma once

#include "gamlab/tensor.hpp"

namespace gamlab {

template <typename T>
struct LinearParams {
    Tensor<T> weight;  // (in_dim, out_dim)
    Tensor<T> bias;    // (out_dim), undefined handle when absent

    int64_t in_dim() const { return weight.dim(0); }
    int64_t out_dim() const { return weight.dim(1); }
};

template <typename T>
LinearParams<T> make_linear(int64_t in_dim, int64_t out_dim, Xoshiro256& rng, double init_std = 0.02,
                            bool with_bias = true) {
    LinearParams<T> p;
    p.weight = normal_init<T>({in_dim, out_dim}, 0.0, init_std, rng);
    p.weight.set_requires_grad(true);
    if (with_bias) {
        p.bias = Tensor<T>::zeros({out_dim}, true);
    }
    return p;
}

// y[..., out] = x[..., in] * W + b
template <typename T>
Tensor<T> linear(const LinearParams<T>& p, const Tensor<T>& x) {
    if (x.dim(x.rank() - 1) != p.in_dim())
        throw ShapeError(str_cat("linear: input ", shape_str(x.shape()), " does not match weight ",
                                 shape_str(p.weight.shape())));
    Tensor<T> y = matmul(x, p.weight);
    if (p.bias.defined()) y = add(y, p.bias);
    return y;
}

template <typename T>
struct LayerNormParams {
    Tensor<T> scale;  // (d)
    Tensor<T> shift;  // (d)
    T epsilon = T(1e-5);
};

template <typename T>
LayerNormParams<T> make_layer_norm(int64_t d, T epsilon = T(1e-5)) {
    if (epsilon <= T(0)) throw ConfigError("layer_norm: epsilon must be positive");
    LayerNormParams<T> p;
    p.scale = Tensor<T>::full({d}, T(1));
    p.scale.set_requires_grad(true);
    p.shift = Tensor<T>::zeros({d}, true);
    p.epsilon = epsilon;
    return p;
}

// Per-position normalization over the last dim, then scale * x_hat + shift.
template <typename T>
Tensor<T> layer_norm(const LayerNormParams<T>& p, const Tensor<T>& x) {
    const int64_t d = p.scale.dim(0);
    if (x.dim(x.rank() - 1) != d)
        throw ShapeError(str_cat("layer_norm: input ", shape_str(x.shape()),
                                 " does not match normalized dim ", d));
    const int64_t rows = x.numel() / d;
    Tensor<T> out = Tensor<T>::uninit(x.shape());
    // x_hat and 1/sigma are saved for backward.
    Tensor<T> xhat = Tensor<T>::uninit(x.shape());
    Tensor<T> inv_sigma = Tensor<T>::uninit({rows});

    const T* in = x.data();
    const T* sc = p.scale.data();
    const T* sh = p.shift.data();
    T* o = out.data();
    T* xh = xhat.data();
    T* isg = inv_sigma.data();
    const T eps = p.epsilon;
    parallel_for(rows, [=](int64_t r0, int64_t r1) {
        for (int64_t r = r0; r < r1; ++r) {
            const T* row = in + r * d;
            T mean = 0;
            for (int64_t i = 0; i < d; ++i) mean += row[i];
            mean /= static_cast<T>(d);
            T var = 0;
            for (int64_t i = 0; i < d; ++i) {
                T c = row[i] - mean;
                var += c * c;
            }
            var /= static_cast<T>(d);
            const T inv = T(1) / std::sqrt(var + eps);
            isg[r] = inv;
            T* xrow = xh + r * d;
            T* orow = o + r * d;
            for (int64_t i = 0; i < d; ++i) {
                xrow[i] = (row[i] - mean) * inv;
                orow[i] = sc[i] * xrow[i] + sh[i];
            }
        }
    });
    flops::add(8ull * static_cast<uint64_t>(x.numel()));

    Tensor<T> xv = x, scv = p.scale, shv = p.shift, ov = out;
    detail::maybe_record("layer_norm", {x, p.scale, p.shift}, ov,
                         [xv, scv, shv, ov, xhat, inv_sigma, rows, d]() mutable {
        if (!ov.has_grad()) return;
        const T* g = ov.grad();
        const T* xh2 = xhat.data();
        const T* isg2 = inv_sigma.data();
        const T* sc2 = scv.data();
        if (scv.requires_grad()) {
            scv.ensure_grad();
            T* dsc = scv.grad();
            for (int64_t r = 0; r < rows; ++r)
                detail::acc_mul(dsc, g + r * d, xh2 + r * d, d);
        }
        if (shv.requires_grad()) {
            shv.ensure_grad();
            T* dsh = shv.grad();
            for (int64_t r = 0; r < rows; ++r)
                detail::Kern<T>::axpy(T(1), g + r * d, dsh, d);
        }
        if (xv.requires_grad()) {
            xv.ensure_grad();
            T* dx = xv.grad();
            parallel_for(rows, [=](int64_t r0, int64_t r1) {
                for (int64_t r = r0; r < r1; ++r) {
                    const T* grow = g + r * d;
                    const T* xrow = xh2 + r * d;
                    T* dxrow = dx + r * d;
                    // dy_hat = g * scale; dx = inv_sigma * (dy_hat - mean(dy_hat) - x_hat * mean(dy_hat * x_hat))
                    T mean_dyh = 0, mean_dyh_xh = 0;
                    for (int64_t i = 0; i < d; ++i) {
                        T dyh = grow[i] * sc2[i];
                        mean_dyh += dyh;
                        mean_dyh_xh += dyh * xrow[i];
                    }
                    mean_dyh /= static_cast<T>(d);
                    mean_dyh_xh /= static_cast<T>(d);
                    const T inv = isg2[r];
                    for (int64_t i = 0; i < d; ++i) {
                        T dyh = grow[i] * sc2[i];
                        dxrow[i] += inv * (dyh - mean_dyh - xrow[i] * mean_dyh_xh);
                    }
                }
            });
        }
        flops::add(10ull * static_cast<uint64_t>(xv.numel()));
    });
    return out;
}

// Row gather: out[..., :] = table[ids[...], :]. Backward scatters with
// accumulation, so repeated ids sum their gradients.
template <typename T>
Tensor<T> embedding_lookup(const Tensor<T>& table, const IntTensor& ids) {
    if (table.rank() != 2) throw ShapeError("embedding_lookup: table must be 2-D");
    const int64_t V = table.dim(0);
    const int64_t d = table.dim(1);
    for (int64_t i = 0; i < ids.numel(); ++i) {
        int32_t id = ids.data[static_cast<size_t>(i)];
        if (id < 0 || id >= V)
            throw IndexError(str_cat("embedding_lookup: id ", id, " out of range [0, ", V, ")"));
    }
    Shape out_shape = ids.shape;
    out_shape.push_back(d);
    Tensor<T> out = Tensor<T>::uninit(out_shape);
    const T* tb = table.data();
    T* o = out.data();
    const int64_t n = ids.numel();
    for (int64_t i = 0; i < n; ++i)
        std::memcpy(o + i * d, tb + static_cast<int64_t>(ids.data[static_cast<size_t>(i)]) * d,
                    sizeof(T) * static_cast<size_t>(d));

    Tensor<T> tv = table, ov = out;
    std::vector<int32_t> idv = ids.data;
    detail::maybe_record("embedding_lookup", {table}, ov, [tv, ov, idv, d]() mutable {
        if (!ov.has_grad()) return;
        tv.ensure_grad();
        const T* g = ov.grad();
        T* dt = tv.grad();
        const int64_t n2 = static_cast<int64_t>(idv.size());
        for (int64_t i = 0; i < n2; ++i)
            detail::Kern<T>::axpy(T(1), g + i * d, dt + static_cast<int64_t>(idv[static_cast<size_t>(i)]) * d, d);
    });
    return out;
}

// Inverted dropout: Train zeroes with probability `rate` and scales
// survivors by 1/(1-rate); Eval is the exact identity. Randomness comes
// from the caller's generator, drawn element-sequentially.
template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double rate, Mode mode, Xoshiro256& rng) {
    if (rate < 0.0 || rate >= 1.0)
        throw ConfigError(str_cat("dropout: rate must be in [0, 1), got ", rate));
    if (mode == Mode::Eval || rate == 0.0) return x;

    const int64_t n = x.numel();
    Tensor<T> mask = Tensor<T>::uninit(x.shape());
    const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
    T* m = mask.data();
    for (int64_t i = 0; i < n; ++i) m[i] = (rng.uniform01() < rate) ? T(0) : keep_scale;

    Tensor<T> out = Tensor<T>::uninit(x.shape());
    detail::Kern<T>::mul(x.data(), m, out.data(), n);
    flops::add(static_cast<uint64_t>(n));

    Tensor<T> xv = x, ov = out;
    detail::maybe_record("dropout", {x}, ov, [xv, ov, mask]() mutable {
        if (!ov.has_grad()) return;
        xv.ensure_grad();
        detail::acc_mul(xv.grad(), ov.grad(), mask.data(), xv.numel());
    });
    return out;
}

// Mean token-level cross entropy: mean over all positions of
// -log softmax(logits)[target], computed with log-sum-exp stabilization.
// logits: [..., V], targets: leading shape of logits.
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, const IntTensor& targets) {
    if (logits.rank() < 2) throw ShapeError("cross_entropy: logits must be at least 2-D");
    const int64_t V = logits.dim(logits.rank() - 1);
    const int64_t P = logits.numel() / V;
    if (targets.numel() != P)
        throw ShapeError(str_cat("cross_entropy: ", P, " logit positions vs ", targets.numel(),
                                 " targets"));
    for (int64_t i = 0; i < P; ++i) {
        int32_t t = targets.data[static_cast<size_t>(i)];
        if (t < 0 || t >= V)
            throw IndexError(str_cat("cross_entropy: target ", t, " out of range [0, ", V, ")"));
    }

    // Softmax probabilities are saved for backward.
    Tensor<T> probs = Tensor<T>::uninit(logits.shape());
    std::vector<T> pos_loss(static_cast<size_t>(P));
    const T* in = logits.data();
    T* pr = probs.data();
    const int32_t* tg = targets.data.data();
    T* pl = pos_loss.data();
    parallel_for(P, [=](int64_t p0, int64_t p1) {
        for (int64_t p = p0; p < p1; ++p) {
            const T* row = in + p * V;
            T mx = row[0];
            for (int64_t i = 1; i < V; ++i) mx = std::max(mx, row[i]);
            T sum = 0;
            T* prow = pr + p * V;
            for (int64_t i = 0; i < V; ++i) {
                T e = std::exp(row[i] - mx);
                prow[i] = e;
                sum += e;
            }
            const T inv = T(1) / sum;
            for (int64_t i = 0; i < V; ++i) prow[i] *= inv;
            pl[p] = std::log(sum) + mx - row[tg[p]];
        }
    });
    // Serial sum for a fixed reduction order.
    T total = 0;
    for (int64_t p = 0; p < P; ++p) total += pos_loss[static_cast<size_t>(p)];
    Tensor<T> out = Tensor<T>::from({1}, {total / static_cast<T>(P)});
    flops::add(5ull * static_cast<uint64_t>(logits.numel()));

    Tensor<T> lv = logits, ov = out;
    std::vector<int32_t> tgv = targets.data;
    detail::maybe_record("cross_entropy", {logits}, ov, [lv, ov, probs, tgv, P, V]() mutable {
        if (!ov.has_grad()) return;
        lv.ensure_grad();
        const T g = ov.grad()[0] / static_cast<T>(P);
        const T* pr2 = probs.data();
        T* dl = lv.grad();
        parallel_for(P, [=, &tgv](int64_t p0, int64_t p1) {
            for (int64_t p = p0; p < p1; ++p) {
                const T* prow = pr2 + p * V;
                T* drow = dl + p * V;
                for (int64_t i = 0; i < V; ++i) drow[i] += g * prow[i];
                drow[tgv[static_cast<size_t>(p)]] -= g;
            }
        });
        flops::add(2ull * static_cast<uint64_t>(lv.numel()));
    });
    return out;
}

} // namespace gamlab
