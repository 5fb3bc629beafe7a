// Single-block scaling study: forward+backward wall time and peak tracked
// tensor memory versus sequence length, for a GAM block and a Transformer
// block. Out-of-memory converts to a skipped record, never a crash.
#pragma once

#include "gamlab/model.hpp"

#include <string>
#include <vector>

namespace gamlab {

struct BenchConfig {
    int64_t batch = 16;
    int64_t d_model = 512;
    int64_t num_slots = 512;
    int64_t kernel_size = 3;
    int64_t n_head = 8;
    int warmup = 3;
    int iters = 10;
    uint64_t seed = 0;
};

struct BenchRecord {
    Arch arch = Arch::Gam;
    int64_t seq_len = 0;
    double time_ms_mean = 0;
    double time_ms_median = 0;
    double peak_mem_mb = 0;  // MiB of tracked tensor allocations
    bool ok = false;         // false => skipped_oom
};

// Times `iters` forward+backward passes (after `warmup` unmeasured ones) of
// one block on random input with a sum-of-outputs loss; peak memory is the
// tensor allocation high-water mark across the measured iterations.
BenchRecord measure_block(Arch arch, const BenchConfig& cfg, int64_t seq_len);

// CSV columns: arch,seq_len,time_ms_mean,time_ms_median,peak_mem_mb,status.
// A leading comment row records threads/kernels/batch/d_model/iters/warmup.
// Skipped rows carry empty time/memory fields.
std::string bench_csv(const std::vector<BenchRecord>& records, const BenchConfig& cfg);

// Two-panel log-log SVG (time and memory vs sequence length).
std::string bench_svg(const std::vector<BenchRecord>& records);

// Runs the cross product of archs x seq_lens and writes scaling.csv and
// scaling.svg under out_dir.
std::vector<BenchRecord> run_sweep(const std::vector<Arch>& archs,
                                   const std::vector<int64_t>& seq_lens, const BenchConfig& cfg,
                                   const std::string& out_dir);

// Least-squares fit y = a*x + b; returns {a, b, r2}.
struct LinearFit {
    double slope = 0;
    double intercept = 0;
    double r2 = 0;
};
LinearFit linear_fit(const std::vector<double>& xs, const std::vector<double>& ys);

} // namespace gamlab
