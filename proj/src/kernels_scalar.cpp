// Scalar reference kernels. These define the semantics the SIMD variants
// are tested against.
#include "gamlab/kernels.hpp"
#include "gamlab/threading.hpp"

#include <algorithm>

namespace gamlab::kernels {

namespace {

template <typename T>
void gemm_nn_ref(const T* a, const T* b, T* c, int64_t m, int64_t n, int64_t k, bool acc) {
    parallel_for(m, [=](int64_t i0, int64_t i1) {
        for (int64_t i = i0; i < i1; ++i) {
            T* crow = c + i * n;
            if (!acc) std::fill(crow, crow + n, T(0));
            const T* arow = a + i * k;
            for (int64_t p = 0; p < k; ++p) {
                T av = arow[p];
                const T* brow = b + p * n;
                for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
        }
    });
}

template <typename T>
void gemm_nt_ref(const T* a, const T* b, T* c, int64_t m, int64_t n, int64_t k, bool acc) {
    parallel_for(m, [=](int64_t i0, int64_t i1) {
        for (int64_t i = i0; i < i1; ++i) {
            const T* arow = a + i * k;
            T* crow = c + i * n;
            for (int64_t j = 0; j < n; ++j) {
                const T* brow = b + j * k;
                T s = 0;
                for (int64_t p = 0; p < k; ++p) s += arow[p] * brow[p];
                crow[j] = acc ? crow[j] + s : s;
            }
        }
    });
}

template <typename T>
void gemm_tn_ref(const T* a, const T* b, T* c, int64_t m, int64_t n, int64_t k, bool acc) {
    // C[k,n] += A[m,k]^T B[m,n]; parallel over output rows (columns of A).
    parallel_for(k, [=](int64_t p0, int64_t p1) {
        for (int64_t p = p0; p < p1; ++p) {
            T* crow = c + p * n;
            if (!acc) std::fill(crow, crow + n, T(0));
            for (int64_t i = 0; i < m; ++i) {
                T av = a[i * k + p];
                const T* brow = b + i * n;
                for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
        }
    });
}

void add_ref(const float* a, const float* b, float* out, int64_t n) {
    for (int64_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}
void sub_ref(const float* a, const float* b, float* out, int64_t n) {
    for (int64_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}
void mul_ref(const float* a, const float* b, float* out, int64_t n) {
    for (int64_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}
void scale_ref(const float* a, float s, float* out, int64_t n) {
    for (int64_t i = 0; i < n; ++i) out[i] = a[i] * s;
}
void axpy_ref(float a, const float* x, float* y, int64_t n) {
    for (int64_t i = 0; i < n; ++i) y[i] += a * x[i];
}
float reduce_sum_ref(const float* a, int64_t n) {
    float s = 0.0f;
    for (int64_t i = 0; i < n; ++i) s += a[i];
    return s;
}
float reduce_max_ref(const float* a, int64_t n) {
    float m = a[0];
    for (int64_t i = 1; i < n; ++i) m = std::max(m, a[i]);
    return m;
}
double sqsum_ref(const float* a, int64_t n) {
    double s = 0.0;
    for (int64_t i = 0; i < n; ++i) s += static_cast<double>(a[i]) * static_cast<double>(a[i]);
    return s;
}

} // namespace

const F32Table& f32_scalar() {
    static const F32Table table{
        &gemm_nn_ref<float>, &gemm_nt_ref<float>, &gemm_tn_ref<float>,
        &add_ref, &sub_ref, &mul_ref, &scale_ref, &axpy_ref,
        &reduce_sum_ref, &reduce_max_ref, &sqsum_ref,
    };
    return table;
}

void gemm_nn_f64(const double* a, const double* b, double* c, int64_t m, int64_t n, int64_t k, bool acc) {
    gemm_nn_ref<double>(a, b, c, m, n, k, acc);
}
void gemm_nt_f64(const double* a, const double* b, double* c, int64_t m, int64_t n, int64_t k, bool acc) {
    gemm_nt_ref<double>(a, b, c, m, n, k, acc);
}
void gemm_tn_f64(const double* a, const double* b, double* c, int64_t m, int64_t n, int64_t k, bool acc) {
    gemm_tn_ref<double>(a, b, c, m, n, k, acc);
}

} // namespace gamlab::kernels
