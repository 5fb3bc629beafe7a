// Data-parallel inner loops behind the tensor ops.
//
// Every kernel has a scalar reference implementation; hot float32 kernels
// additionally have AVX2+FMA variants. The implementation is picked once at
// startup from CPU capabilities, overridable with GAMLAB_KERNELS=scalar|avx2
// or set_isa(). Equivalence between the variants is covered by tests:
// elementwise kernels match bitwise, reductions and GEMM within a tight
// relative tolerance (different summation order).
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace gamlab::kernels {

enum class Isa { scalar, avx2 };

Isa active_isa();
void set_isa(Isa isa);            // throws ConfigError when unsupported
bool cpu_supports_avx2();
std::string isa_name(Isa isa);

// Float32 kernel table; one function pointer per primitive.
struct F32Table {
    // C[m,n] = (acc ? C : 0) + A[m,k] * B[k,n]
    void (*gemm_nn)(const float* a, const float* b, float* c, int64_t m, int64_t n, int64_t k, bool acc);
    // C[m,n] = (acc ? C : 0) + A[m,k] * B[n,k]^T
    void (*gemm_nt)(const float* a, const float* b, float* c, int64_t m, int64_t n, int64_t k, bool acc);
    // C[k,n] = (acc ? C : 0) + A[m,k]^T * B[m,n]
    void (*gemm_tn)(const float* a, const float* b, float* c, int64_t m, int64_t n, int64_t k, bool acc);

    void (*add)(const float* a, const float* b, float* out, int64_t n);
    void (*sub)(const float* a, const float* b, float* out, int64_t n);
    void (*mul)(const float* a, const float* b, float* out, int64_t n);
    void (*scale)(const float* a, float s, float* out, int64_t n);
    void (*axpy)(float a, const float* x, float* y, int64_t n);  // y += a*x
    float (*reduce_sum)(const float* a, int64_t n);
    float (*reduce_max)(const float* a, int64_t n);
    double (*sqsum)(const float* a, int64_t n);  // sum of squares, f64 accumulator
};

const F32Table& f32();

// Scalar reference table, always available (oracle for equivalence tests).
const F32Table& f32_scalar();
// AVX2 table; null pointers when the build lacks AVX2 support.
const F32Table* f32_avx2();

// Float64 path is scalar only; declared here so templated op code has one
// call surface for both precisions.
void gemm_nn_f64(const double* a, const double* b, double* c, int64_t m, int64_t n, int64_t k, bool acc);
void gemm_nt_f64(const double* a, const double* b, double* c, int64_t m, int64_t n, int64_t k, bool acc);
void gemm_tn_f64(const double* a, const double* b, double* c, int64_t m, int64_t n, int64_t k, bool acc);

} // namespace gamlab::kernels
