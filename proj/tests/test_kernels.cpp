// Scalar vs SIMD kernel equivalence. Elementwise variants must match
// bitwise (same operations, no reassociation); GEMM and reductions compare
// within a relative tolerance that covers summation-order differences.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gamlab/kernels.hpp"
#include "gamlab/rng.hpp"

#include <cmath>
#include <vector>

using namespace gamlab;

namespace {

std::vector<float> rand_vec(int64_t n, Xoshiro256& rng, double scale = 1.0) {
    std::vector<float> v(static_cast<size_t>(n));
    for (auto& x : v) x = static_cast<float>(rng.uniform(-scale, scale));
    return v;
}

double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

bool have_avx2() { return kernels::f32_avx2() != nullptr && kernels::cpu_supports_avx2(); }

} // namespace

TEST_CASE("gemm variants agree with the scalar reference") {
    if (!have_avx2()) return;  // nothing to compare on this host
    const auto& ref = kernels::f32_scalar();
    const auto& simd = *kernels::f32_avx2();
    Xoshiro256 rng(7);

    // Ragged sizes cover every tail path of the tiled kernels.
    const int64_t sizes[][3] = {{1, 1, 1},   {2, 3, 4},    {4, 16, 8},  {5, 17, 9},
                                {8, 33, 31}, {13, 64, 27}, {64, 70, 65}, {3, 8, 128}};
    for (auto [m, n, k] : sizes) {
        auto a = rand_vec(m * k, rng);
        auto b_nn = rand_vec(k * n, rng);
        auto b_nt = rand_vec(n * k, rng);
        auto b_tn = rand_vec(m * n, rng);

        for (bool acc : {false, true}) {
            std::vector<float> c0 = rand_vec(m * n, rng), c1 = c0;
            ref.gemm_nn(a.data(), b_nn.data(), c0.data(), m, n, k, acc);
            simd.gemm_nn(a.data(), b_nn.data(), c1.data(), m, n, k, acc);
            for (size_t i = 0; i < c0.size(); ++i) CHECK(rel_err(c0[i], c1[i]) < 1e-5);

            c0 = rand_vec(m * n, rng), c1 = c0;
            ref.gemm_nt(a.data(), b_nt.data(), c0.data(), m, n, k, acc);
            simd.gemm_nt(a.data(), b_nt.data(), c1.data(), m, n, k, acc);
            for (size_t i = 0; i < c0.size(); ++i) CHECK(rel_err(c0[i], c1[i]) < 1e-5);

            std::vector<float> d0 = rand_vec(k * n, rng), d1 = d0;
            ref.gemm_tn(a.data(), b_tn.data(), d0.data(), m, n, k, acc);
            simd.gemm_tn(a.data(), b_tn.data(), d1.data(), m, n, k, acc);
            for (size_t i = 0; i < d0.size(); ++i) CHECK(rel_err(d0[i], d1[i]) < 1e-5);
        }
    }
}

TEST_CASE("elementwise kernels match the scalar reference bitwise") {
    if (!have_avx2()) return;
    const auto& ref = kernels::f32_scalar();
    const auto& simd = *kernels::f32_avx2();
    Xoshiro256 rng(11);

    for (int64_t n : {1, 7, 8, 9, 64, 1000, 4097}) {
        auto a = rand_vec(n, rng), b = rand_vec(n, rng);
        std::vector<float> o0(static_cast<size_t>(n)), o1(static_cast<size_t>(n));

        ref.add(a.data(), b.data(), o0.data(), n);
        simd.add(a.data(), b.data(), o1.data(), n);
        CHECK(o0 == o1);
        ref.sub(a.data(), b.data(), o0.data(), n);
        simd.sub(a.data(), b.data(), o1.data(), n);
        CHECK(o0 == o1);
        ref.mul(a.data(), b.data(), o0.data(), n);
        simd.mul(a.data(), b.data(), o1.data(), n);
        CHECK(o0 == o1);
        ref.scale(a.data(), 1.7f, o0.data(), n);
        simd.scale(a.data(), 1.7f, o1.data(), n);
        CHECK(o0 == o1);
    }
}

TEST_CASE("axpy and reductions agree within tolerance") {
    if (!have_avx2()) return;
    const auto& ref = kernels::f32_scalar();
    const auto& simd = *kernels::f32_avx2();
    Xoshiro256 rng(13);

    for (int64_t n : {1, 5, 8, 100, 4099}) {
        auto x = rand_vec(n, rng);
        auto y0 = rand_vec(n, rng);
        auto y1 = y0;
        ref.axpy(0.3f, x.data(), y0.data(), n);
        simd.axpy(0.3f, x.data(), y1.data(), n);
        for (size_t i = 0; i < y0.size(); ++i) CHECK(rel_err(y0[i], y1[i]) < 1e-6);

        CHECK(rel_err(ref.reduce_sum(x.data(), n), simd.reduce_sum(x.data(), n)) < 1e-5);
        CHECK(ref.reduce_max(x.data(), n) == simd.reduce_max(x.data(), n));
        CHECK(rel_err(ref.sqsum(x.data(), n), simd.sqsum(x.data(), n)) < 1e-12);
    }
}

TEST_CASE("isa selection is overridable and reports availability") {
    kernels::Isa before = kernels::active_isa();
    kernels::set_isa(kernels::Isa::scalar);
    CHECK(kernels::active_isa() == kernels::Isa::scalar);
    CHECK(kernels::isa_name(kernels::Isa::scalar) == "scalar");
    if (have_avx2()) {
        kernels::set_isa(kernels::Isa::avx2);
        CHECK(kernels::active_isa() == kernels::Isa::avx2);
    }
    kernels::set_isa(before);
}
