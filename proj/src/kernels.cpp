// Kernel implementation selection.
#include "gamlab/kernels.hpp"

#include "gamlab/common.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>

namespace gamlab::kernels {

bool cpu_supports_avx2() {
#if defined(__x86_64__) || defined(__i386__)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

namespace {

Isa resolve_initial_isa() {
    const bool have_avx2 = f32_avx2() != nullptr && cpu_supports_avx2();
    if (const char* env = std::getenv("GAMLAB_KERNELS")) {
        if (std::strcmp(env, "scalar") == 0) return Isa::scalar;
        if (std::strcmp(env, "avx2") == 0 && have_avx2) return Isa::avx2;
        // Unknown value or unsupported request falls through to auto.
    }
    return have_avx2 ? Isa::avx2 : Isa::scalar;
}

std::atomic<Isa> g_isa{resolve_initial_isa()};

} // namespace

Isa active_isa() { return g_isa.load(std::memory_order_relaxed); }

void set_isa(Isa isa) {
    if (isa == Isa::avx2 && (f32_avx2() == nullptr || !cpu_supports_avx2()))
        throw ConfigError("avx2 kernels are not available on this host/build");
    g_isa.store(isa, std::memory_order_relaxed);
}

std::string isa_name(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

const F32Table& f32() {
    if (active_isa() == Isa::avx2) {
        const F32Table* t = f32_avx2();
        if (t) return *t;
    }
    return f32_scalar();
}

} // namespace gamlab::kernels
