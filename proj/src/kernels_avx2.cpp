// AVX2+FMA float32 kernels. Compiled with -mavx2 -mfma in its own TU and
// reached only through the dispatch table, so the rest of the binary stays
// runnable on non-AVX2 hosts.
#include "gamlab/kernels.hpp"

#ifdef GAMLAB_HAVE_AVX2

#include "gamlab/threading.hpp"

#include <algorithm>
#include <cmath>
#include <immintrin.h>

namespace gamlab::kernels {

namespace {

// ---- GEMM C[m,n] = A[m,k] B[k,n] -------------------------------------
// Register tile: 4 rows x 16 columns (8 accumulators), B rows streamed.
constexpr int64_t kMr = 4;
constexpr int64_t kNr = 16;

inline void nn_tile_4x16(const float* a, const float* b, float* c,
                         int64_t n, int64_t k, int64_t i, int64_t j, bool acc) {
    __m256 c00, c01, c10, c11, c20, c21, c30, c31;
    if (acc) {
        c00 = _mm256_loadu_ps(c + (i + 0) * n + j);
        c01 = _mm256_loadu_ps(c + (i + 0) * n + j + 8);
        c10 = _mm256_loadu_ps(c + (i + 1) * n + j);
        c11 = _mm256_loadu_ps(c + (i + 1) * n + j + 8);
        c20 = _mm256_loadu_ps(c + (i + 2) * n + j);
        c21 = _mm256_loadu_ps(c + (i + 2) * n + j + 8);
        c30 = _mm256_loadu_ps(c + (i + 3) * n + j);
        c31 = _mm256_loadu_ps(c + (i + 3) * n + j + 8);
    } else {
        c00 = c01 = c10 = c11 = c20 = c21 = c30 = c31 = _mm256_setzero_ps();
    }
    for (int64_t p = 0; p < k; ++p) {
        const __m256 b0 = _mm256_loadu_ps(b + p * n + j);
        const __m256 b1 = _mm256_loadu_ps(b + p * n + j + 8);
        const __m256 a0 = _mm256_set1_ps(a[(i + 0) * k + p]);
        const __m256 a1 = _mm256_set1_ps(a[(i + 1) * k + p]);
        const __m256 a2 = _mm256_set1_ps(a[(i + 2) * k + p]);
        const __m256 a3 = _mm256_set1_ps(a[(i + 3) * k + p]);
        c00 = _mm256_fmadd_ps(a0, b0, c00);
        c01 = _mm256_fmadd_ps(a0, b1, c01);
        c10 = _mm256_fmadd_ps(a1, b0, c10);
        c11 = _mm256_fmadd_ps(a1, b1, c11);
        c20 = _mm256_fmadd_ps(a2, b0, c20);
        c21 = _mm256_fmadd_ps(a2, b1, c21);
        c30 = _mm256_fmadd_ps(a3, b0, c30);
        c31 = _mm256_fmadd_ps(a3, b1, c31);
    }
    _mm256_storeu_ps(c + (i + 0) * n + j, c00);
    _mm256_storeu_ps(c + (i + 0) * n + j + 8, c01);
    _mm256_storeu_ps(c + (i + 1) * n + j, c10);
    _mm256_storeu_ps(c + (i + 1) * n + j + 8, c11);
    _mm256_storeu_ps(c + (i + 2) * n + j, c20);
    _mm256_storeu_ps(c + (i + 2) * n + j + 8, c21);
    _mm256_storeu_ps(c + (i + 3) * n + j, c30);
    _mm256_storeu_ps(c + (i + 3) * n + j + 8, c31);
}

// Rows not covered by the 4-row tile: one row, 8-wide columns.
inline void nn_row(const float* a, const float* b, float* c,
                   int64_t n, int64_t k, int64_t i, int64_t j0, int64_t j1, bool acc) {
    int64_t j = j0;
    for (; j + 8 <= j1; j += 8) {
        __m256 cv = acc ? _mm256_loadu_ps(c + i * n + j) : _mm256_setzero_ps();
        for (int64_t p = 0; p < k; ++p) {
            cv = _mm256_fmadd_ps(_mm256_set1_ps(a[i * k + p]), _mm256_loadu_ps(b + p * n + j), cv);
        }
        _mm256_storeu_ps(c + i * n + j, cv);
    }
    for (; j < j1; ++j) {
        float s = acc ? c[i * n + j] : 0.0f;
        for (int64_t p = 0; p < k; ++p) s = std::fma(a[i * k + p], b[p * n + j], s);
        c[i * n + j] = s;
    }
}

void gemm_nn_avx2(const float* a, const float* b, float* c, int64_t m, int64_t n, int64_t k, bool acc) {
    parallel_for((m + kMr - 1) / kMr, [=](int64_t t0, int64_t t1) {
        for (int64_t t = t0; t < t1; ++t) {
            int64_t i = t * kMr;
            if (i + kMr <= m) {
                int64_t j = 0;
                for (; j + kNr <= n; j += kNr) nn_tile_4x16(a, b, c, n, k, i, j, acc);
                if (j < n) {
                    for (int64_t r = 0; r < kMr; ++r) nn_row(a, b, c, n, k, i + r, j, n, acc);
                }
            } else {
                for (int64_t r = i; r < m; ++r) nn_row(a, b, c, n, k, r, 0, n, acc);
            }
        }
    });
}

inline float hsum8(__m256 v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    lo = _mm_hadd_ps(lo, lo);
    lo = _mm_hadd_ps(lo, lo);
    return _mm_cvtss_f32(lo);
}

// ---- GEMM C[m,n] = A[m,k] B[n,k]^T (row-by-row dot products) ----------
void gemm_nt_avx2(const float* a, const float* b, float* c, int64_t m, int64_t n, int64_t k, bool acc) {
    parallel_for(m, [=](int64_t i0, int64_t i1) {
        for (int64_t i = i0; i < i1; ++i) {
            const float* arow = a + i * k;
            float* crow = c + i * n;
            int64_t j = 0;
            for (; j + 2 <= n; j += 2) {
                const float* b0 = b + j * k;
                const float* b1 = b + (j + 1) * k;
                __m256 s0 = _mm256_setzero_ps();
                __m256 s1 = _mm256_setzero_ps();
                int64_t p = 0;
                for (; p + 8 <= k; p += 8) {
                    const __m256 av = _mm256_loadu_ps(arow + p);
                    s0 = _mm256_fmadd_ps(av, _mm256_loadu_ps(b0 + p), s0);
                    s1 = _mm256_fmadd_ps(av, _mm256_loadu_ps(b1 + p), s1);
                }
                float d0 = hsum8(s0);
                float d1 = hsum8(s1);
                for (; p < k; ++p) {
                    d0 += arow[p] * b0[p];
                    d1 += arow[p] * b1[p];
                }
                crow[j] = acc ? crow[j] + d0 : d0;
                crow[j + 1] = acc ? crow[j + 1] + d1 : d1;
            }
            for (; j < n; ++j) {
                const float* brow = b + j * k;
                __m256 s = _mm256_setzero_ps();
                int64_t p = 0;
                for (; p + 8 <= k; p += 8)
                    s = _mm256_fmadd_ps(_mm256_loadu_ps(arow + p), _mm256_loadu_ps(brow + p), s);
                float d = hsum8(s);
                for (; p < k; ++p) d += arow[p] * brow[p];
                crow[j] = acc ? crow[j] + d : d;
            }
        }
    });
}

// ---- GEMM C[k,n] = A[m,k]^T B[m,n] (outer-product accumulation) ------
void gemm_tn_avx2(const float* a, const float* b, float* c, int64_t m, int64_t n, int64_t k, bool acc) {
    parallel_for(k, [=](int64_t p0, int64_t p1) {
        for (int64_t p = p0; p < p1; ++p) {
            float* crow = c + p * n;
            if (!acc) std::fill(crow, crow + n, 0.0f);
            for (int64_t i = 0; i < m; ++i) {
                const __m256 av = _mm256_set1_ps(a[i * k + p]);
                const float* brow = b + i * n;
                int64_t j = 0;
                for (; j + 8 <= n; j += 8) {
                    __m256 cv = _mm256_loadu_ps(crow + j);
                    cv = _mm256_fmadd_ps(av, _mm256_loadu_ps(brow + j), cv);
                    _mm256_storeu_ps(crow + j, cv);
                }
                for (; j < n; ++j) crow[j] = std::fma(a[i * k + p], brow[j], crow[j]);
            }
        }
    });
}

// ---- elementwise ------------------------------------------------------
void add_avx2(const float* a, const float* b, float* out, int64_t n) {
    int64_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(out + i, _mm256_add_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
    for (; i < n; ++i) out[i] = a[i] + b[i];
}
void sub_avx2(const float* a, const float* b, float* out, int64_t n) {
    int64_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(out + i, _mm256_sub_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
    for (; i < n; ++i) out[i] = a[i] - b[i];
}
void mul_avx2(const float* a, const float* b, float* out, int64_t n) {
    int64_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(out + i, _mm256_mul_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
    for (; i < n; ++i) out[i] = a[i] * b[i];
}
void scale_avx2(const float* a, float s, float* out, int64_t n) {
    const __m256 sv = _mm256_set1_ps(s);
    int64_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(out + i, _mm256_mul_ps(_mm256_loadu_ps(a + i), sv));
    for (; i < n; ++i) out[i] = a[i] * s;
}
void axpy_avx2(float a, const float* x, float* y, int64_t n) {
    const __m256 av = _mm256_set1_ps(a);
    int64_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 yv = _mm256_loadu_ps(y + i);
        yv = _mm256_fmadd_ps(av, _mm256_loadu_ps(x + i), yv);
        _mm256_storeu_ps(y + i, yv);
    }
    for (; i < n; ++i) y[i] = std::fma(a, x[i], y[i]);
}

// ---- reductions --------------------------------------------------------
float reduce_sum_avx2(const float* a, int64_t n) {
    __m256 s = _mm256_setzero_ps();
    int64_t i = 0;
    for (; i + 8 <= n; i += 8) s = _mm256_add_ps(s, _mm256_loadu_ps(a + i));
    float out = hsum8(s);
    for (; i < n; ++i) out += a[i];
    return out;
}
float reduce_max_avx2(const float* a, int64_t n) {
    if (n < 8) {
        float m = a[0];
        for (int64_t i = 1; i < n; ++i) m = std::max(m, a[i]);
        return m;
    }
    __m256 mv = _mm256_loadu_ps(a);
    int64_t i = 8;
    for (; i + 8 <= n; i += 8) mv = _mm256_max_ps(mv, _mm256_loadu_ps(a + i));
    alignas(32) float lanes[8];
    _mm256_store_ps(lanes, mv);
    float m = lanes[0];
    for (int r = 1; r < 8; ++r) m = std::max(m, lanes[r]);
    for (; i < n; ++i) m = std::max(m, a[i]);
    return m;
}
double sqsum_avx2(const float* a, int64_t n) {
    __m256d s0 = _mm256_setzero_pd();
    __m256d s1 = _mm256_setzero_pd();
    int64_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 v = _mm256_loadu_ps(a + i);
        const __m256d lo = _mm256_cvtps_pd(_mm256_castps256_ps128(v));
        const __m256d hi = _mm256_cvtps_pd(_mm256_extractf128_ps(v, 1));
        s0 = _mm256_fmadd_pd(lo, lo, s0);
        s1 = _mm256_fmadd_pd(hi, hi, s1);
    }
    alignas(32) double lanes[4];
    __m256d s = _mm256_add_pd(s0, s1);
    _mm256_store_pd(lanes, s);
    double out = lanes[0] + lanes[1] + lanes[2] + lanes[3];
    for (; i < n; ++i) out += static_cast<double>(a[i]) * static_cast<double>(a[i]);
    return out;
}

} // namespace

const F32Table* f32_avx2() {
    static const F32Table table{
        &gemm_nn_avx2, &gemm_nt_avx2, &gemm_tn_avx2,
        &add_avx2, &sub_avx2, &mul_avx2, &scale_avx2, &axpy_avx2,
        &reduce_sum_avx2, &reduce_max_avx2, &sqsum_avx2,
    };
    return &table;
}

} // namespace gamlab::kernels

#else // !GAMLAB_HAVE_AVX2

namespace gamlab::kernels {
const F32Table* f32_avx2() { return nullptr; }
} // namespace gamlab::kernels

#endif
