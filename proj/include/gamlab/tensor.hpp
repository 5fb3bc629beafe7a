// Dense tensor values with tape-based reverse-mode autodiff.
//
// A Tensor is a cheap handle (shared impl) holding shape, a tracked data
// buffer, an optional same-shape gradient buffer and an optional node id in
// the active tape. Ops are pure: they allocate fresh outputs and never
// mutate inputs. When a tape is active and an input requires gradients, the
// op appends a backward closure; closures run in strict reverse append
// order, and gradients from multiple uses accumulate by addition.
//
// Precision is a template parameter: float for training and benchmarks,
// double for finite-difference gradient checking.
#pragma once

#include "gamlab/common.hpp"
#include "gamlab/kernels.hpp"
#include "gamlab/mem.hpp"
#include "gamlab/rng.hpp"
#include "gamlab/threading.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

namespace gamlab {

// Running FLOP estimate for everything routed through tensor ops (forward
// and backward). Consumed by the cost-shape tests and benchmarks.
namespace flops {
inline std::atomic<uint64_t> g_flops{0};
inline void add(uint64_t n) { g_flops.fetch_add(n, std::memory_order_relaxed); }
inline uint64_t count() { return g_flops.load(std::memory_order_relaxed); }
inline void reset() { g_flops.store(0, std::memory_order_relaxed); }
} // namespace flops

enum class Mode { Train, Eval };

// ---------------------------------------------------------------------------
// storage
// ---------------------------------------------------------------------------

template <typename T>
class Storage {
public:
    explicit Storage(int64_t n, bool zero_fill) : n_(n) {
        mem::add_bytes(bytes());
        try {
            ptr_ = static_cast<T*>(::operator new(sizeof(T) * static_cast<size_t>(n_),
                                                  std::align_val_t(64)));
        } catch (...) {
            mem::sub_bytes(bytes());
            throw;
        }
        if (zero_fill) std::fill(ptr_, ptr_ + n_, T(0));
    }
    ~Storage() {
        ::operator delete(ptr_, std::align_val_t(64));
        mem::sub_bytes(bytes());
    }
    Storage(const Storage&) = delete;
    Storage& operator=(const Storage&) = delete;

    T* data() noexcept { return ptr_; }
    const T* data() const noexcept { return ptr_; }
    int64_t size() const noexcept { return n_; }
    size_t bytes() const noexcept { return sizeof(T) * static_cast<size_t>(n_); }

private:
    T* ptr_ = nullptr;
    int64_t n_ = 0;
};

// Integer id tensor (token ids, targets). No gradients.
struct IntTensor {
    Shape shape;
    std::vector<int32_t> data;

    IntTensor() = default;
    IntTensor(Shape s, std::vector<int32_t> d) : shape(std::move(s)), data(std::move(d)) {
        if (shape_numel(shape) != static_cast<int64_t>(data.size()))
            throw ShapeError(str_cat("IntTensor: shape ", shape_str(shape), " does not match ",
                                     data.size(), " values"));
    }
    int64_t numel() const { return static_cast<int64_t>(data.size()); }
};

// ---------------------------------------------------------------------------
// tensor handle
// ---------------------------------------------------------------------------

template <typename T>
class Tensor {
    struct Impl {
        Shape shape;
        std::shared_ptr<Storage<T>> data;
        std::shared_ptr<Storage<T>> grad;  // allocated on demand
        bool requires_grad = false;
        int node = -1;
    };

public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        Tensor t = alloc(std::move(shape), true);
        t.impl_->requires_grad = requires_grad;
        return t;
    }
    static Tensor full(Shape shape, T value) {
        Tensor t = alloc(std::move(shape), false);
        std::fill(t.data(), t.data() + t.numel(), value);
        return t;
    }
    static Tensor from(Shape shape, const std::vector<T>& values) {
        Tensor t = alloc(std::move(shape), false);
        if (t.numel() != static_cast<int64_t>(values.size()))
            throw ShapeError(str_cat("Tensor::from: shape ", shape_str(t.shape()),
                                     " does not match ", values.size(), " values"));
        std::copy(values.begin(), values.end(), t.data());
        return t;
    }
    // Uninitialized output buffer for ops that overwrite every element.
    static Tensor uninit(Shape shape) { return alloc(std::move(shape), false); }

    bool defined() const noexcept { return impl_ != nullptr; }
    const Shape& shape() const { return impl_->shape; }
    int64_t rank() const { return static_cast<int64_t>(impl_->shape.size()); }
    int64_t dim(int64_t i) const { return impl_->shape[static_cast<size_t>(i)]; }
    int64_t numel() const { return impl_->data->size(); }

    T* data() { return impl_->data->data(); }
    const T* data() const { return impl_->data->data(); }

    bool requires_grad() const { return impl_->requires_grad; }
    Tensor& set_requires_grad(bool v) {
        impl_->requires_grad = v;
        return *this;
    }

    int node() const { return impl_->node; }
    void set_node(int id) { impl_->node = id; }

    bool has_grad() const { return impl_ && impl_->grad != nullptr; }
    void ensure_grad() {
        if (!impl_->grad) impl_->grad = std::make_shared<Storage<T>>(numel(), true);
    }
    T* grad() { return impl_->grad ? impl_->grad->data() : nullptr; }
    const T* grad() const { return impl_->grad ? impl_->grad->data() : nullptr; }
    void zero_grad() {
        if (impl_->grad) std::fill(impl_->grad->data(), impl_->grad->data() + numel(), T(0));
    }
    void drop_grad() { impl_->grad.reset(); }

    // Deep copy of values only (no graph linkage, no grad).
    Tensor clone() const {
        Tensor t = alloc(shape(), false);
        std::copy(data(), data() + numel(), t.data());
        return t;
    }
    // Same data buffer, fresh identity outside any graph.
    Tensor detach() const {
        Tensor t;
        t.impl_ = std::make_shared<Impl>();
        t.impl_->shape = shape();
        t.impl_->data = impl_->data;
        return t;
    }

    T item() const {
        if (numel() != 1)
            throw ShapeError(str_cat("item(): tensor has shape ", shape_str(shape())));
        return data()[0];
    }
    T at(std::initializer_list<int64_t> idx) const {
        if (static_cast<int64_t>(idx.size()) != rank())
            throw ShapeError("at(): index rank mismatch");
        int64_t lin = 0;
        size_t d = 0;
        for (int64_t i : idx) {
            lin = lin * impl_->shape[d] + i;
            ++d;
        }
        return data()[lin];
    }

    bool shares_data_with(const Tensor& o) const { return impl_->data == o.impl_->data; }

private:
    static Tensor alloc(Shape shape, bool zero_fill) {
        if (shape.empty()) throw ShapeError("tensor shape must have >= 1 dims");
        for (int64_t d : shape)
            if (d <= 0) throw ShapeError(str_cat("tensor shape has non-positive dim: ", shape_str(shape)));
        Tensor t;
        t.impl_ = std::make_shared<Impl>();
        t.impl_->data = std::make_shared<Storage<T>>(shape_numel(shape), zero_fill);
        t.impl_->shape = std::move(shape);
        return t;
    }
    // Shares the data storage (used by reshape).
    static Tensor view_of(const Tensor& src, Shape shape) {
        Tensor t;
        t.impl_ = std::make_shared<Impl>();
        t.impl_->data = src.impl_->data;
        t.impl_->shape = std::move(shape);
        return t;
    }

    std::shared_ptr<Impl> impl_;

    template <typename U>
    friend Tensor<U> reshape(const Tensor<U>& x, Shape shape);
};

// ---------------------------------------------------------------------------
// tape
// ---------------------------------------------------------------------------

template <typename T>
class Tape {
public:
    struct Node {
        const char* op;
        std::function<void()> backward;
    };

    int record(const char* op, std::function<void()> fn) {
        nodes_.push_back(Node{op, std::move(fn)});
        return static_cast<int>(nodes_.size()) - 1;
    }
    void run_backward_from(int node_id) {
        for (int i = node_id; i >= 0; --i) nodes_[static_cast<size_t>(i)].backward();
    }
    size_t size() const { return nodes_.size(); }
    const char* op_name(int i) const { return nodes_[static_cast<size_t>(i)].op; }

    class Scope {
    public:
        explicit Scope(Tape& t) : prev_(active_slot()) { active_slot() = &t; }
        ~Scope() { active_slot() = prev_; }
        Scope(const Scope&) = delete;
        Scope& operator=(const Scope&) = delete;

    private:
        Tape* prev_;
    };

    static Tape* active() { return active_slot(); }

private:
    static Tape*& active_slot() {
        static thread_local Tape* a = nullptr;
        return a;
    }
    std::vector<Node> nodes_;
};

// ---------------------------------------------------------------------------
// kernel shim: float32 goes through the dispatch table, float64 through the
// scalar reference path. GEMM calls also feed the FLOP counter.
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
struct Kern;

template <>
struct Kern<float> {
    static void gemm_nn(const float* a, const float* b, float* c, int64_t m, int64_t n, int64_t k, bool acc) {
        kernels::f32().gemm_nn(a, b, c, m, n, k, acc);
        flops::add(2ull * static_cast<uint64_t>(m) * static_cast<uint64_t>(n) * static_cast<uint64_t>(k));
    }
    static void gemm_nt(const float* a, const float* b, float* c, int64_t m, int64_t n, int64_t k, bool acc) {
        kernels::f32().gemm_nt(a, b, c, m, n, k, acc);
        flops::add(2ull * static_cast<uint64_t>(m) * static_cast<uint64_t>(n) * static_cast<uint64_t>(k));
    }
    static void gemm_tn(const float* a, const float* b, float* c, int64_t m, int64_t n, int64_t k, bool acc) {
        kernels::f32().gemm_tn(a, b, c, m, n, k, acc);
        flops::add(2ull * static_cast<uint64_t>(m) * static_cast<uint64_t>(n) * static_cast<uint64_t>(k));
    }
    static void add(const float* a, const float* b, float* o, int64_t n) { kernels::f32().add(a, b, o, n); }
    static void sub(const float* a, const float* b, float* o, int64_t n) { kernels::f32().sub(a, b, o, n); }
    static void mul(const float* a, const float* b, float* o, int64_t n) { kernels::f32().mul(a, b, o, n); }
    static void scale(const float* a, float s, float* o, int64_t n) { kernels::f32().scale(a, s, o, n); }
    static void axpy(float a, const float* x, float* y, int64_t n) { kernels::f32().axpy(a, x, y, n); }
    static float reduce_sum(const float* a, int64_t n) { return kernels::f32().reduce_sum(a, n); }
    static double sqsum(const float* a, int64_t n) { return kernels::f32().sqsum(a, n); }
};

template <>
struct Kern<double> {
    static void gemm_nn(const double* a, const double* b, double* c, int64_t m, int64_t n, int64_t k, bool acc) {
        kernels::gemm_nn_f64(a, b, c, m, n, k, acc);
        flops::add(2ull * static_cast<uint64_t>(m) * static_cast<uint64_t>(n) * static_cast<uint64_t>(k));
    }
    static void gemm_nt(const double* a, const double* b, double* c, int64_t m, int64_t n, int64_t k, bool acc) {
        kernels::gemm_nt_f64(a, b, c, m, n, k, acc);
        flops::add(2ull * static_cast<uint64_t>(m) * static_cast<uint64_t>(n) * static_cast<uint64_t>(k));
    }
    static void gemm_tn(const double* a, const double* b, double* c, int64_t m, int64_t n, int64_t k, bool acc) {
        kernels::gemm_tn_f64(a, b, c, m, n, k, acc);
        flops::add(2ull * static_cast<uint64_t>(m) * static_cast<uint64_t>(n) * static_cast<uint64_t>(k));
    }
    static void add(const double* a, const double* b, double* o, int64_t n) {
        for (int64_t i = 0; i < n; ++i) o[i] = a[i] + b[i];
    }
    static void sub(const double* a, const double* b, double* o, int64_t n) {
        for (int64_t i = 0; i < n; ++i) o[i] = a[i] - b[i];
    }
    static void mul(const double* a, const double* b, double* o, int64_t n) {
        for (int64_t i = 0; i < n; ++i) o[i] = a[i] * b[i];
    }
    static void scale(const double* a, double s, double* o, int64_t n) {
        for (int64_t i = 0; i < n; ++i) o[i] = a[i] * s;
    }
    static void axpy(double a, const double* x, double* y, int64_t n) {
        for (int64_t i = 0; i < n; ++i) y[i] += a * x[i];
    }
    static double reduce_sum(const double* a, int64_t n) {
        double s = 0;
        for (int64_t i = 0; i < n; ++i) s += a[i];
        return s;
    }
    static double sqsum(const double* a, int64_t n) {
        double s = 0;
        for (int64_t i = 0; i < n; ++i) s += a[i] * a[i];
        return s;
    }
};

// dst += a ⊙ b
template <typename T>
inline void acc_mul(T* dst, const T* a, const T* b, int64_t n) {
    for (int64_t i = 0; i < n; ++i) dst[i] += a[i] * b[i];
}

// Records a backward closure when grads are requested for any input.
template <typename T, typename Fn>
void maybe_record(const char* op, std::initializer_list<Tensor<T>> inputs, Tensor<T>& out, Fn&& fn) {
    Tape<T>* tape = Tape<T>::active();
    if (!tape) return;
    bool any = false;
    for (const auto& t : inputs)
        if (t.defined() && t.requires_grad()) any = true;
    if (!any) return;
    out.set_requires_grad(true);
    out.set_node(tape->record(op, std::forward<Fn>(fn)));
}

} // namespace detail

// ---------------------------------------------------------------------------
// initializers
// ---------------------------------------------------------------------------

// Xavier/Glorot uniform over a 2-D shape: U(-b, b), b = sqrt(6 / (fan_in + fan_out)).
template <typename T>
Tensor<T> xavier_uniform(Shape shape, Xoshiro256& rng) {
    if (shape.size() != 2)
        throw ConfigError(str_cat("xavier_uniform requires a 2-D shape, got ", shape_str(shape)));
    const double bound = std::sqrt(6.0 / static_cast<double>(shape[0] + shape[1]));
    Tensor<T> t = Tensor<T>::uninit(std::move(shape));
    T* p = t.data();
    const int64_t n = t.numel();
    for (int64_t i = 0; i < n; ++i)
        p[i] = static_cast<T>((2.0 * rng.uniform01() - 1.0) * bound);
    return t;
}

template <typename T>
Tensor<T> normal_init(Shape shape, double mean, double stddev, Xoshiro256& rng) {
    Tensor<T> t = Tensor<T>::uninit(std::move(shape));
    T* p = t.data();
    const int64_t n = t.numel();
    for (int64_t i = 0; i < n; ++i) p[i] = static_cast<T>(rng.normal(mean, stddev));
    return t;
}

// ---------------------------------------------------------------------------
// matmul family
// ---------------------------------------------------------------------------

namespace detail {

struct MatmulDims {
    int64_t batch;  // product of leading dims of a
    int64_t m, k;
    bool b_broadcast;  // b is 2-D, shared across the batch
};

template <typename T>
MatmulDims matmul_prologue(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
    if (a.rank() < 2 || b.rank() < 2)
        throw ShapeError(str_cat(op, ": operands must be at least 2-D, got ", shape_str(a.shape()),
                                 " and ", shape_str(b.shape())));
    MatmulDims d{};
    d.m = a.dim(a.rank() - 2);
    d.k = a.dim(a.rank() - 1);
    d.b_broadcast = b.rank() == 2;
    if (!d.b_broadcast) {
        if (a.rank() != b.rank())
            throw ShapeError(str_cat(op, ": batch ranks disagree: ", shape_str(a.shape()), " vs ",
                                     shape_str(b.shape())));
        for (int64_t i = 0; i + 2 < a.rank(); ++i)
            if (a.dim(i) != b.dim(i))
                throw ShapeError(str_cat(op, ": batch dims disagree: ", shape_str(a.shape()), " vs ",
                                         shape_str(b.shape())));
    }
    d.batch = 1;
    for (int64_t i = 0; i + 2 < a.rank(); ++i) d.batch *= a.dim(i);
    return d;
}

} // namespace detail

// C[..., m, n] = A[..., m, k] * B[..., k, n]. B may be 2-D (shared across
// the batch) or carry identical leading dims.
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    detail::MatmulDims d = detail::matmul_prologue("matmul", a, b);
    const int64_t bk = b.dim(b.rank() - 2);
    const int64_t n = b.dim(b.rank() - 1);
    if (bk != d.k)
        throw ShapeError(str_cat("matmul: inner dimensions disagree: ", shape_str(a.shape()), " vs ",
                                 shape_str(b.shape())));

    Shape out_shape(a.shape().begin(), a.shape().end() - 1);
    out_shape.push_back(n);
    Tensor<T> out = Tensor<T>::uninit(out_shape);

    const int64_t m = d.m, k = d.k, batch = d.batch;
    const bool bshared = d.b_broadcast;
    for (int64_t s = 0; s < batch; ++s) {
        detail::Kern<T>::gemm_nn(a.data() + s * m * k, b.data() + (bshared ? 0 : s * k * n),
                                 out.data() + s * m * n, m, n, k, false);
    }

    Tensor<T> av = a, bv = b, ov = out;
    detail::maybe_record("matmul", {a, b}, out, [av, bv, ov, m, n, k, batch, bshared]() mutable {
        if (!ov.has_grad()) return;
        const T* g = ov.grad();
        if (av.requires_grad()) {
            av.ensure_grad();
            for (int64_t s = 0; s < batch; ++s)
                detail::Kern<T>::gemm_nt(g + s * m * n, bv.data() + (bshared ? 0 : s * k * n),
                                         av.grad() + s * m * k, m, k, n, true);
        }
        if (bv.requires_grad()) {
            bv.ensure_grad();
            for (int64_t s = 0; s < batch; ++s)
                detail::Kern<T>::gemm_tn(av.data() + s * m * k, g + s * m * n,
                                         bv.grad() + (bshared ? 0 : s * k * n), m, n, k, true);
        }
    });
    return out;
}

// C[..., m, n] = A[..., m, k] * B[..., n, k]^T. Same batching rules.
template <typename T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b) {
    detail::MatmulDims d = detail::matmul_prologue("matmul_nt", a, b);
    const int64_t n = b.dim(b.rank() - 2);
    const int64_t bk = b.dim(b.rank() - 1);
    if (bk != d.k)
        throw ShapeError(str_cat("matmul_nt: inner dimensions disagree: ", shape_str(a.shape()),
                                 " vs ", shape_str(b.shape())));

    Shape out_shape(a.shape().begin(), a.shape().end() - 1);
    out_shape.push_back(n);
    Tensor<T> out = Tensor<T>::uninit(out_shape);

    const int64_t m = d.m, k = d.k, batch = d.batch;
    const bool bshared = d.b_broadcast;
    for (int64_t s = 0; s < batch; ++s) {
        detail::Kern<T>::gemm_nt(a.data() + s * m * k, b.data() + (bshared ? 0 : s * n * k),
                                 out.data() + s * m * n, m, n, k, false);
    }

    Tensor<T> av = a, bv = b, ov = out;
    detail::maybe_record("matmul_nt", {a, b}, out, [av, bv, ov, m, n, k, batch, bshared]() mutable {
        if (!ov.has_grad()) return;
        const T* g = ov.grad();
        if (av.requires_grad()) {
            av.ensure_grad();
            for (int64_t s = 0; s < batch; ++s)
                detail::Kern<T>::gemm_nn(g + s * m * n, bv.data() + (bshared ? 0 : s * n * k),
                                         av.grad() + s * m * k, m, k, n, true);
        }
        if (bv.requires_grad()) {
            bv.ensure_grad();
            // dB[n, k] = dC[m, n]^T A[m, k]
            for (int64_t s = 0; s < batch; ++s)
                detail::Kern<T>::gemm_tn(g + s * m * n, av.data() + s * m * k,
                                         bv.grad() + (bshared ? 0 : s * n * k), m, k, n, true);
        }
    });
    return out;
}

// ---------------------------------------------------------------------------
// elementwise family
// ---------------------------------------------------------------------------

namespace detail {

// Binary ops accept equal shapes or a second operand whose shape is a suffix
// of the first (leading-dim broadcast).
template <typename T>
void binary_shape_check(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
    if (shape_eq(a.shape(), b.shape())) return;
    if (shape_is_suffix(b.shape(), a.shape())) return;
    throw ShapeError(str_cat(op, ": incompatible shapes ", shape_str(a.shape()), " and ",
                             shape_str(b.shape())));
}

} // namespace detail

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    detail::binary_shape_check("add", a, b);
    Tensor<T> out = Tensor<T>::uninit(a.shape());
    const int64_t blen = b.numel();
    const int64_t reps = a.numel() / blen;
    for (int64_t r = 0; r < reps; ++r)
        detail::Kern<T>::add(a.data() + r * blen, b.data(), out.data() + r * blen, blen);
    flops::add(static_cast<uint64_t>(a.numel()));

    Tensor<T> av = a, bv = b, ov = out;
    detail::maybe_record("add", {a, b}, out, [av, bv, ov, blen, reps]() mutable {
        if (!ov.has_grad()) return;
        const T* g = ov.grad();
        if (av.requires_grad()) {
            av.ensure_grad();
            detail::Kern<T>::axpy(T(1), g, av.grad(), av.numel());
        }
        if (bv.requires_grad()) {
            bv.ensure_grad();
            for (int64_t r = 0; r < reps; ++r)
                detail::Kern<T>::axpy(T(1), g + r * blen, bv.grad(), blen);
        }
    });
    return out;
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    detail::binary_shape_check("sub", a, b);
    Tensor<T> out = Tensor<T>::uninit(a.shape());
    const int64_t blen = b.numel();
    const int64_t reps = a.numel() / blen;
    for (int64_t r = 0; r < reps; ++r)
        detail::Kern<T>::sub(a.data() + r * blen, b.data(), out.data() + r * blen, blen);
    flops::add(static_cast<uint64_t>(a.numel()));

    Tensor<T> av = a, bv = b, ov = out;
    detail::maybe_record("sub", {a, b}, out, [av, bv, ov, blen, reps]() mutable {
        if (!ov.has_grad()) return;
        const T* g = ov.grad();
        if (av.requires_grad()) {
            av.ensure_grad();
            detail::Kern<T>::axpy(T(1), g, av.grad(), av.numel());
        }
        if (bv.requires_grad()) {
            bv.ensure_grad();
            for (int64_t r = 0; r < reps; ++r)
                detail::Kern<T>::axpy(T(-1), g + r * blen, bv.grad(), blen);
        }
    });
    return out;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    detail::binary_shape_check("mul", a, b);
    Tensor<T> out = Tensor<T>::uninit(a.shape());
    const int64_t blen = b.numel();
    const int64_t reps = a.numel() / blen;
    for (int64_t r = 0; r < reps; ++r)
        detail::Kern<T>::mul(a.data() + r * blen, b.data(), out.data() + r * blen, blen);
    flops::add(static_cast<uint64_t>(a.numel()));

    Tensor<T> av = a, bv = b, ov = out;
    detail::maybe_record("mul", {a, b}, out, [av, bv, ov, blen, reps]() mutable {
        if (!ov.has_grad()) return;
        const T* g = ov.grad();
        if (av.requires_grad()) {
            av.ensure_grad();
            for (int64_t r = 0; r < reps; ++r)
                detail::acc_mul(av.grad() + r * blen, g + r * blen, bv.data(), blen);
        }
        if (bv.requires_grad()) {
            bv.ensure_grad();
            for (int64_t r = 0; r < reps; ++r)
                detail::acc_mul(bv.grad(), g + r * blen, av.data() + r * blen, blen);
        }
        flops::add(2ull * static_cast<uint64_t>(av.numel()));
    });
    return out;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T s) {
    Tensor<T> out = Tensor<T>::uninit(x.shape());
    detail::Kern<T>::scale(x.data(), s, out.data(), x.numel());
    flops::add(static_cast<uint64_t>(x.numel()));

    Tensor<T> xv = x, ov = out;
    detail::maybe_record("scale", {x}, out, [xv, ov, s]() mutable {
        if (!ov.has_grad()) return;
        xv.ensure_grad();
        detail::Kern<T>::axpy(s, ov.grad(), xv.grad(), xv.numel());
    });
    return out;
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
    Tensor<T> out = Tensor<T>::uninit(x.shape());
    const T* in = x.data();
    T* o = out.data();
    const int64_t n = x.numel();
    parallel_for(n, [=](int64_t i0, int64_t i1) {
        for (int64_t i = i0; i < i1; ++i) {
            T v = in[i];
            if (v >= T(0)) {
                T e = std::exp(-v);
                o[i] = T(1) / (T(1) + e);
            } else {
                T e = std::exp(v);
                o[i] = e / (T(1) + e);
            }
        }
    });
    flops::add(4ull * static_cast<uint64_t>(n));

    Tensor<T> xv = x, ov = out;
    detail::maybe_record("sigmoid", {x}, out, [xv, ov]() mutable {
        if (!ov.has_grad()) return;
        xv.ensure_grad();
        const T* y = ov.data();
        const T* g = ov.grad();
        T* dx = xv.grad();
        const int64_t m = xv.numel();
        for (int64_t i = 0; i < m; ++i) dx[i] += g[i] * y[i] * (T(1) - y[i]);
        flops::add(3ull * static_cast<uint64_t>(m));
    });
    return out;
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
    // Exact form: 0.5 x (1 + erf(x / sqrt(2))).
    Tensor<T> out = Tensor<T>::uninit(x.shape());
    const T* in = x.data();
    T* o = out.data();
    const int64_t n = x.numel();
    constexpr double inv_sqrt2 = 0.70710678118654752440;
    parallel_for(n, [=](int64_t i0, int64_t i1) {
        for (int64_t i = i0; i < i1; ++i) {
            double v = static_cast<double>(in[i]);
            o[i] = static_cast<T>(0.5 * v * (1.0 + std::erf(v * inv_sqrt2)));
        }
    });
    flops::add(6ull * static_cast<uint64_t>(n));

    Tensor<T> xv = x, ov = out;
    detail::maybe_record("gelu", {x}, out, [xv, ov]() mutable {
        if (!ov.has_grad()) return;
        xv.ensure_grad();
        const T* in2 = xv.data();
        const T* g = ov.grad();
        T* dx = xv.grad();
        const int64_t m = xv.numel();
        constexpr double inv_sqrt2pi = 0.39894228040143267794;
        for (int64_t i = 0; i < m; ++i) {
            double v = static_cast<double>(in2[i]);
            double cdf = 0.5 * (1.0 + std::erf(v * 0.70710678118654752440));
            double pdf = inv_sqrt2pi * std::exp(-0.5 * v * v);
            dx[i] += g[i] * static_cast<T>(cdf + v * pdf);
        }
        flops::add(8ull * static_cast<uint64_t>(m));
    });
    return out;
}

// ---------------------------------------------------------------------------
// softmax
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
void softmax_row_backward(const T* y, const T* g, T* dx, int64_t n) {
    T dot = 0;
    for (int64_t i = 0; i < n; ++i) dot += g[i] * y[i];
    for (int64_t i = 0; i < n; ++i) dx[i] += y[i] * (g[i] - dot);
}

} // namespace detail

// Softmax over the last dimension with max-subtraction.
template <typename T>
Tensor<T> softmax_lastdim(const Tensor<T>& x) {
    const int64_t n = x.dim(x.rank() - 1);
    const int64_t rows = x.numel() / n;
    Tensor<T> out = Tensor<T>::uninit(x.shape());
    const T* in = x.data();
    T* o = out.data();

    // NumericError must escape the worker lambda: run row checks serially by
    // scanning first, then the hot loop in parallel.
    std::atomic<bool> bad{false};
    parallel_for(rows, [&](int64_t r0, int64_t r1) {
        for (int64_t r = r0; r < r1; ++r) {
            const T* row = in + r * n;
            T mx = row[0];
            bool rowbad = false;
            for (int64_t i = 0; i < n; ++i) {
                if (!std::isfinite(static_cast<double>(row[i]))) rowbad = true;
                if (row[i] > mx) mx = row[i];
            }
            if (rowbad) {
                bad.store(true, std::memory_order_relaxed);
                continue;
            }
            T* orow = o + r * n;
            T sum = 0;
            for (int64_t i = 0; i < n; ++i) {
                T e = std::exp(row[i] - mx);
                orow[i] = e;
                sum += e;
            }
            T inv = T(1) / sum;
            for (int64_t i = 0; i < n; ++i) orow[i] *= inv;
        }
    });
    if (bad.load()) throw NumericError("softmax_lastdim: non-finite input");
    flops::add(5ull * static_cast<uint64_t>(x.numel()));

    Tensor<T> xv = x, ov = out;
    detail::maybe_record("softmax_lastdim", {x}, out, [xv, ov, rows, n]() mutable {
        if (!ov.has_grad()) return;
        xv.ensure_grad();
        const T* y = ov.data();
        const T* g = ov.grad();
        T* dx = xv.grad();
        parallel_for(rows, [=](int64_t r0, int64_t r1) {
            for (int64_t r = r0; r < r1; ++r)
                detail::softmax_row_backward(y + r * n, g + r * n, dx + r * n, n);
        });
        flops::add(4ull * static_cast<uint64_t>(rows) * static_cast<uint64_t>(n));
    });
    return out;
}

// Row-causal softmax over the trailing [N, N] dims: row t is a softmax over
// columns 0..t; strictly-future columns are exactly zero. Equivalent to
// masking with -inf before a dense softmax, fused to avoid materializing the
// masked scores.
template <typename T>
Tensor<T> softmax_causal(const Tensor<T>& x) {
    if (x.rank() < 2 || x.dim(x.rank() - 1) != x.dim(x.rank() - 2))
        throw ShapeError(str_cat("softmax_causal: trailing dims must be square, got ",
                                 shape_str(x.shape())));
    const int64_t n = x.dim(x.rank() - 1);
    const int64_t mats = x.numel() / (n * n);
    Tensor<T> out = Tensor<T>::uninit(x.shape());
    const T* in = x.data();
    T* o = out.data();

    std::atomic<bool> bad{false};
    parallel_for(mats * n, [&](int64_t w0, int64_t w1) {
        for (int64_t w = w0; w < w1; ++w) {
            const int64_t t = w % n;  // row within the matrix
            const T* row = in + w * n;
            T* orow = o + w * n;
            const int64_t len = t + 1;
            T mx = row[0];
            bool rowbad = false;
            for (int64_t i = 0; i < len; ++i) {
                if (!std::isfinite(static_cast<double>(row[i]))) rowbad = true;
                if (row[i] > mx) mx = row[i];
            }
            if (rowbad) {
                bad.store(true, std::memory_order_relaxed);
                continue;
            }
            T sum = 0;
            for (int64_t i = 0; i < len; ++i) {
                T e = std::exp(row[i] - mx);
                orow[i] = e;
                sum += e;
            }
            T inv = T(1) / sum;
            for (int64_t i = 0; i < len; ++i) orow[i] *= inv;
            for (int64_t i = len; i < n; ++i) orow[i] = T(0);
        }
    });
    if (bad.load()) throw NumericError("softmax_causal: non-finite input");
    flops::add(3ull * static_cast<uint64_t>(x.numel()));

    Tensor<T> xv = x, ov = out;
    detail::maybe_record("softmax_causal", {x}, out, [xv, ov, mats, n]() mutable {
        if (!ov.has_grad()) return;
        xv.ensure_grad();
        const T* y = ov.data();
        const T* g = ov.grad();
        T* dx = xv.grad();
        parallel_for(mats * n, [=](int64_t w0, int64_t w1) {
            for (int64_t w = w0; w < w1; ++w) {
                const int64_t t = w % n;
                detail::softmax_row_backward(y + w * n, g + w * n, dx + w * n, t + 1);
            }
        });
        flops::add(2ull * static_cast<uint64_t>(xv.numel()));
    });
    return out;
}

// ---------------------------------------------------------------------------
// shape ops
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
    if (shape_numel(shape) != x.numel())
        throw ShapeError(str_cat("reshape: cannot view ", shape_str(x.shape()), " as ",
                                 shape_str(shape)));
    Tensor<T> out = Tensor<T>::view_of(x, std::move(shape));
    Tensor<T> xv = x, ov = out;
    detail::maybe_record("reshape", {x}, out, [xv, ov]() mutable {
        if (!ov.has_grad()) return;
        xv.ensure_grad();
        detail::Kern<T>::axpy(T(1), ov.grad(), xv.grad(), xv.numel());
    });
    return out;
}

// Materializing axis permutation.
template <typename T>
Tensor<T> permute(const Tensor<T>& x, const std::vector<int>& perm) {
    const int64_t r = x.rank();
    if (static_cast<int64_t>(perm.size()) != r)
        throw ShapeError("permute: perm rank mismatch");
    std::vector<bool> seen(perm.size(), false);
    for (int p : perm) {
        if (p < 0 || p >= r || seen[static_cast<size_t>(p)]) throw ShapeError("permute: invalid permutation");
        seen[static_cast<size_t>(p)] = true;
    }
    Shape out_shape(perm.size());
    for (size_t i = 0; i < perm.size(); ++i) out_shape[i] = x.dim(perm[i]);

    // out[idx] = in[idx ∘ perm]: walk output linearly, step input strides.
    std::vector<int64_t> in_strides(perm.size());
    {
        int64_t s = 1;
        for (int64_t i = r - 1; i >= 0; --i) {
            in_strides[static_cast<size_t>(i)] = s;
            s *= x.dim(i);
        }
    }
    std::vector<int64_t> step(perm.size());
    for (size_t i = 0; i < perm.size(); ++i) step[i] = in_strides[static_cast<size_t>(perm[i])];

    Tensor<T> out = Tensor<T>::uninit(out_shape);
    const T* in = x.data();
    T* o = out.data();
    const int64_t total = x.numel();
    {
        std::vector<int64_t> idx(perm.size(), 0);
        int64_t src = 0;
        for (int64_t lin = 0; lin < total; ++lin) {
            o[lin] = in[src];
            for (int64_t d = r - 1; d >= 0; --d) {
                idx[static_cast<size_t>(d)]++;
                src += step[static_cast<size_t>(d)];
                if (idx[static_cast<size_t>(d)] < out_shape[static_cast<size_t>(d)]) break;
                src -= step[static_cast<size_t>(d)] * out_shape[static_cast<size_t>(d)];
                idx[static_cast<size_t>(d)] = 0;
            }
        }
    }

    Tensor<T> xv = x, ov = out;
    detail::maybe_record("permute", {x}, out, [xv, ov, step, out_shape]() mutable {
        if (!ov.has_grad()) return;
        xv.ensure_grad();
        const T* g = ov.grad();
        T* dx = xv.grad();
        const int64_t r2 = static_cast<int64_t>(out_shape.size());
        std::vector<int64_t> idx(out_shape.size(), 0);
        int64_t src = 0;
        const int64_t total2 = xv.numel();
        for (int64_t lin = 0; lin < total2; ++lin) {
            dx[src] += g[lin];
            for (int64_t d = r2 - 1; d >= 0; --d) {
                idx[static_cast<size_t>(d)]++;
                src += step[static_cast<size_t>(d)];
                if (idx[static_cast<size_t>(d)] < out_shape[static_cast<size_t>(d)]) break;
                src -= step[static_cast<size_t>(d)] * out_shape[static_cast<size_t>(d)];
                idx[static_cast<size_t>(d)] = 0;
            }
        }
    });
    return out;
}

// Contiguous slice along one axis.
template <typename T>
Tensor<T> narrow(const Tensor<T>& x, int64_t axis, int64_t start, int64_t len) {
    if (axis < 0 || axis >= x.rank()) throw ShapeError("narrow: axis out of range");
    if (start < 0 || len <= 0 || start + len > x.dim(axis))
        throw ShapeError(str_cat("narrow: slice [", start, ", ", start + len, ") exceeds dim ",
                                 x.dim(axis), " of ", shape_str(x.shape())));
    Shape out_shape = x.shape();
    out_shape[static_cast<size_t>(axis)] = len;
    int64_t inner = 1;
    for (int64_t i = axis + 1; i < x.rank(); ++i) inner *= x.dim(i);
    int64_t outer = 1;
    for (int64_t i = 0; i < axis; ++i) outer *= x.dim(i);
    const int64_t in_block = x.dim(axis) * inner;
    const int64_t out_block = len * inner;

    Tensor<T> out = Tensor<T>::uninit(out_shape);
    const T* in = x.data();
    T* o = out.data();
    for (int64_t a = 0; a < outer; ++a)
        std::memcpy(o + a * out_block, in + a * in_block + start * inner,
                    sizeof(T) * static_cast<size_t>(out_block));

    Tensor<T> xv = x, ov = out;
    detail::maybe_record("narrow", {x}, out, [xv, ov, outer, in_block, out_block, start, inner]() mutable {
        if (!ov.has_grad()) return;
        xv.ensure_grad();
        const T* g = ov.grad();
        T* dx = xv.grad();
        for (int64_t a = 0; a < outer; ++a)
            detail::Kern<T>::axpy(T(1), g + a * out_block, dx + a * in_block + start * inner, out_block);
    });
    return out;
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

// Sum of all elements -> scalar tensor of shape (1).
template <typename T>
Tensor<T> sum_all(const Tensor<T>& x) {
    Tensor<T> out = Tensor<T>::uninit({1});
    out.data()[0] = detail::Kern<T>::reduce_sum(x.data(), x.numel());
    flops::add(static_cast<uint64_t>(x.numel()));

    Tensor<T> xv = x, ov = out;
    detail::maybe_record("sum_all", {x}, out, [xv, ov]() mutable {
        if (!ov.has_grad()) return;
        xv.ensure_grad();
        const T g = ov.grad()[0];
        T* dx = xv.grad();
        const int64_t n = xv.numel();
        for (int64_t i = 0; i < n; ++i) dx[i] += g;
    });
    return out;
}

// ---------------------------------------------------------------------------
// backward driver
// ---------------------------------------------------------------------------

// Seeds d(loss)/d(loss) = 1 and runs the active tape in reverse from the
// loss node. Every reachable requires_grad tensor receives accumulated
// gradients.
template <typename T>
void backward(Tensor<T>& loss) {
    if (loss.numel() != 1)
        throw ShapeError(str_cat("backward: loss must be scalar, got shape ",
                                 shape_str(loss.shape())));
    Tape<T>* tape = Tape<T>::active();
    if (!tape) throw ConfigError("backward: no active autodiff tape");
    if (loss.node() < 0) {
        if (loss.requires_grad()) {
            loss.ensure_grad();
            loss.grad()[0] = T(1);
            return;
        }
        throw ConfigError("backward: loss is not attached to the active graph");
    }
    loss.ensure_grad();
    loss.grad()[0] = T(1);
    tape->run_backward_from(loss.node());
}

} // namespace gamlab
