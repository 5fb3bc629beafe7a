// Exact accounting of live tensor-buffer bytes. The peak counter is the
// high-water mark since the last reset and backs the benchmark's
// peak-memory metric. An optional byte limit turns allocation overflow
// into a catchable OomError instead of an OS-level kill.
#pragma once

#include <cstddef>
#include <new>

namespace gamlab::mem {

struct OomError : std::bad_alloc {
    explicit OomError(size_t requested) : requested_bytes(requested) {}
    const char* what() const noexcept override { return "tensor allocation exceeds configured memory limit"; }
    size_t requested_bytes;
};

// Called by tensor storage on allocate/free.
void add_bytes(size_t n);    // throws OomError if a limit is set and exceeded
void sub_bytes(size_t n) noexcept;

size_t current_bytes() noexcept;
size_t peak_bytes() noexcept;
void reset_peak() noexcept;  // peak := current

// 0 disables the limit.
void set_limit_bytes(size_t n) noexcept;
size_t limit_bytes() noexcept;

// RAII measurement scope: resets the peak to the current live total on entry
// and again on exit. Within the scope the peak is monotone.
class PeakScope {
public:
    PeakScope();
    ~PeakScope();
    size_t peak() const noexcept;  // high-water mark since construction
};

} // namespace gamlab::mem
