// AdamW with decoupled weight decay, global-norm gradient clipping, and the
// linear-warmup + cosine-decay learning-rate schedule.
#pragma once

#include "gamlab/model.hpp"

#include <cmath>
#include <vector>

namespace gamlab {

struct TrainConfig {
    double lr_peak = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.95;
    double weight_decay = 0.1;
    double adam_eps = 1e-8;
    int64_t warmup_steps = 100;
    int64_t epochs = 5;
    int64_t batch_size = 32;
    double clip_norm = 1.0;
    uint64_t seed = 0;

    void validate() const {
        if (lr_peak <= 0 || beta1 <= 0 || beta1 >= 1 || beta2 <= 0 || beta2 >= 1 ||
            weight_decay < 0 || adam_eps <= 0 || warmup_steps < 1 || epochs < 1 ||
            batch_size < 1 || clip_norm <= 0)
            throw ConfigError("train config: hyperparameters out of range");
    }
};

// Linear warmup to lr_peak over warmup_steps, then half-cosine decay to zero
// at total_steps.
inline double lr_at(int64_t step, int64_t total_steps, const TrainConfig& cfg) {
    if (total_steps <= cfg.warmup_steps)
        throw ConfigError(str_cat("lr_at: total_steps ", total_steps,
                                  " must exceed warmup_steps ", cfg.warmup_steps));
    if (step < 0 || step > total_steps)
        throw ConfigError(str_cat("lr_at: step ", step, " outside [0, ", total_steps, "]"));
    if (step <= cfg.warmup_steps)
        return cfg.lr_peak * static_cast<double>(step) / static_cast<double>(cfg.warmup_steps);
    const double progress = static_cast<double>(step - cfg.warmup_steps) /
                            static_cast<double>(total_steps - cfg.warmup_steps);
    return cfg.lr_peak * 0.5 * (1.0 + std::cos(3.14159265358979323846 * progress));
}

// Scales all gradients by max_norm / norm when the global L2 norm exceeds
// max_norm. Returns the observed pre-clip norm.
template <typename T>
double clip_grad_norm(std::vector<ParamRef<T>>& params, double max_norm) {
    double sq = 0.0;
    for (auto& p : params)
        if (p.tensor.has_grad()) sq += detail::Kern<T>::sqsum(p.tensor.grad(), p.tensor.numel());
    const double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
        const T s = static_cast<T>(max_norm / norm);
        for (auto& p : params) {
            if (!p.tensor.has_grad()) continue;
            T* g = p.tensor.grad();
            detail::Kern<T>::scale(g, s, g, p.tensor.numel());
        }
    }
    return norm;
}

// p <- p - lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * p), decay
// decoupled from the moment estimates and skipped for no-decay params
// (biases, layer-norm scale/shift).
template <typename T>
class AdamW {
public:
    AdamW(std::vector<ParamRef<T>>& params, TrainConfig cfg) : cfg_(cfg) {
        cfg_.validate();
        for (auto& p : params) {
            m_.push_back(Tensor<T>::zeros(p.tensor.shape()));
            v_.push_back(Tensor<T>::zeros(p.tensor.shape()));
        }
    }

    int64_t step_count() const { return t_; }

    void step(std::vector<ParamRef<T>>& params, double lr) {
        if (params.size() != m_.size())
            throw ConfigError("adamw: parameter list does not match optimizer state");
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (size_t i = 0; i < params.size(); ++i) {
            Tensor<T>& pt = params[i].tensor;
            if (!pt.has_grad())
                throw ConfigError(str_cat("adamw: parameter '", params[i].name, "' has no gradient"));
            if (!shape_eq(m_[i].shape(), pt.shape()))
                throw ConfigError(str_cat("adamw: state shape mismatch for '", params[i].name, "'"));
            const T* g = pt.grad();
            T* p = pt.data();
            T* m = m_[i].data();
            T* v = v_[i].data();
            const T b1 = static_cast<T>(cfg_.beta1);
            const T b2 = static_cast<T>(cfg_.beta2);
            const T one_m_b1 = static_cast<T>(1.0 - cfg_.beta1);
            const T one_m_b2 = static_cast<T>(1.0 - cfg_.beta2);
            const T eps = static_cast<T>(cfg_.adam_eps);
            const T lr_t = static_cast<T>(lr);
            const T wd = params[i].decay ? static_cast<T>(cfg_.weight_decay) : T(0);
            const T inv_bc1 = static_cast<T>(1.0 / bc1);
            const T inv_bc2 = static_cast<T>(1.0 / bc2);
            const int64_t n = pt.numel();
            for (int64_t j = 0; j < n; ++j) {
                m[j] = b1 * m[j] + one_m_b1 * g[j];
                v[j] = b2 * v[j] + one_m_b2 * g[j] * g[j];
                const T m_hat = m[j] * inv_bc1;
                const T v_hat = v[j] * inv_bc2;
                p[j] -= lr_t * (m_hat / (std::sqrt(v_hat) + eps) + wd * p[j]);
            }
        }
    }

private:
    TrainConfig cfg_;
    std::vector<Tensor<T>> m_, v_;
    int64_t t_ = 0;
};

} // namespace gamlab
