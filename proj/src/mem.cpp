#include "gamlab/mem.hpp"

#include <algorithm>
#include <atomic>

namespace gamlab::mem {

namespace {
std::atomic<size_t> g_current{0};
std::atomic<size_t> g_peak{0};
std::atomic<size_t> g_limit{0};
} // namespace

void add_bytes(size_t n) {
    size_t limit = g_limit.load(std::memory_order_relaxed);
    size_t now = g_current.fetch_add(n, std::memory_order_relaxed) + n;
    if (limit != 0 && now > limit) {
        g_current.fetch_sub(n, std::memory_order_relaxed);
        throw OomError(n);
    }
    size_t prev = g_peak.load(std::memory_order_relaxed);
    while (now > prev && !g_peak.compare_exchange_weak(prev, now, std::memory_order_relaxed)) {
    }
}

void sub_bytes(size_t n) noexcept {
    g_current.fetch_sub(n, std::memory_order_relaxed);
}

size_t current_bytes() noexcept { return g_current.load(std::memory_order_relaxed); }
size_t peak_bytes() noexcept { return g_peak.load(std::memory_order_relaxed); }

void reset_peak() noexcept {
    g_peak.store(g_current.load(std::memory_order_relaxed), std::memory_order_relaxed);
}

void set_limit_bytes(size_t n) noexcept { g_limit.store(n, std::memory_order_relaxed); }
size_t limit_bytes() noexcept { return g_limit.load(std::memory_order_relaxed); }

PeakScope::PeakScope() { reset_peak(); }

PeakScope::~PeakScope() { reset_peak(); }

size_t PeakScope::peak() const noexcept { return peak_bytes(); }

} // namespace gamlab::mem
