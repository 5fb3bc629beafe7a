#include "gamlab/bench.hpp"

#include "gamlab/kernels.hpp"
#include "gamlab/threading.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace gamlab {

namespace {

using Clock = std::chrono::steady_clock;

template <typename Fn>
double timed_ms(Fn&& fn) {
    const auto t0 = Clock::now();
    fn();
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

} // namespace

BenchRecord measure_block(Arch arch, const BenchConfig& cfg, int64_t seq_len) {
    if (seq_len < 1) throw ConfigError("measure_block: seq_len must be >= 1");
    BenchRecord rec;
    rec.arch = arch;
    rec.seq_len = seq_len;

    try {
        Xoshiro256 rng(derive_seed(cfg.seed, 0xb37cULL));
        GamBlockParams<float> gam;
        TransformerBlockParams<float> tfm;
        if (arch == Arch::Gam)
            gam = make_gam_block<float>(cfg.d_model, cfg.num_slots, cfg.kernel_size,
                                        GamVariant::Full, rng);
        else
            tfm = make_transformer_block<float>(cfg.d_model, cfg.n_head, rng);

        Tensor<float> x = normal_init<float>({cfg.batch, seq_len, cfg.d_model}, 0.0, 1.0, rng);
        x.set_requires_grad(true);  // symmetric work: both blocks also produce dx

        auto params_of = [&]() {
            std::vector<Tensor<float>> ps;
            if (arch == Arch::Gam) {
                for (Tensor<float>* t : {&gam.conv_weight, &gam.conv_bias, &gam.memory,
                                         &gam.gate.weight, &gam.gate.bias, &gam.ffn_in.weight,
                                         &gam.ffn_in.bias, &gam.ffn_out.weight, &gam.ffn_out.bias,
                                         &gam.ln1.scale, &gam.ln1.shift, &gam.ln2.scale,
                                         &gam.ln2.shift})
                    if (t->defined()) ps.push_back(*t);
            } else {
                for (LinearParams<float>* l : {&tfm.wq, &tfm.wk, &tfm.wv, &tfm.wo, &tfm.ffn_in,
                                               &tfm.ffn_out}) {
                    ps.push_back(l->weight);
                    ps.push_back(l->bias);
                }
                for (Tensor<float>* t : {&tfm.ln1.scale, &tfm.ln1.shift, &tfm.ln2.scale,
                                         &tfm.ln2.shift})
                    ps.push_back(*t);
            }
            ps.push_back(x);
            return ps;
        };
        std::vector<Tensor<float>> all_tensors = params_of();

        auto one_pass = [&]() {
            Tape<float> tape;
            typename Tape<float>::Scope scope(tape);
            Xoshiro256 drop_rng(0);
            Tensor<float> y = arch == Arch::Gam
                                  ? gam_block_forward(gam, GamVariant::Full, x, 0.0, Mode::Train,
                                                      drop_rng)
                                  : transformer_block_forward(tfm, x, 0.0, Mode::Train, drop_rng);
            Tensor<float> loss = sum_all(y);
            backward(loss);
            for (auto& t : all_tensors) t.zero_grad();
        };

        for (int w = 0; w < cfg.warmup; ++w) one_pass();

        mem::PeakScope peak_scope;
        std::vector<double> times;
        times.reserve(static_cast<size_t>(cfg.iters));
        for (int i = 0; i < cfg.iters; ++i) times.push_back(timed_ms(one_pass));

        rec.peak_mem_mb = static_cast<double>(peak_scope.peak()) / (1024.0 * 1024.0);
        double sum = 0;
        for (double t : times) sum += t;
        rec.time_ms_mean = sum / static_cast<double>(times.size());
        std::vector<double> sorted = times;
        std::sort(sorted.begin(), sorted.end());
        const size_t mid = sorted.size() / 2;
        rec.time_ms_median = sorted.size() % 2 == 1
                                 ? sorted[mid]
                                 : 0.5 * (sorted[mid - 1] + sorted[mid]);
        rec.ok = true;
    } catch (const std::bad_alloc&) {
        rec.ok = false;  // skipped_oom: covers both mem::OomError and allocator failure
    }
    return rec;
}

std::string bench_csv(const std::vector<BenchRecord>& records, const BenchConfig& cfg) {
    std::ostringstream out;
    out << "# threads=" << thread_count() << " kernels=" << kernels::isa_name(kernels::active_isa())
        << " batch=" << cfg.batch << " d_model=" << cfg.d_model << " iters=" << cfg.iters
        << " warmup=" << cfg.warmup << "\n";
    out << "arch,seq_len,time_ms_mean,time_ms_median,peak_mem_mb,status\n";
    out.precision(6);
    out << std::fixed;
    for (const auto& r : records) {
        out << arch_name(r.arch) << "," << r.seq_len << ",";
        if (r.ok)
            out << r.time_ms_mean << "," << r.time_ms_median << "," << r.peak_mem_mb << ",ok\n";
        else
            out << ",,,skipped_oom\n";
    }
    return out.str();
}

namespace {

struct Series {
    std::string label;
    std::string color;
    std::vector<std::pair<double, double>> pts;  // (seq_len, value)
};

std::string svg_panel(const std::vector<Series>& series, const std::string& title,
                      const std::string& y_label, double x_off) {
    // Log-log panel with decade ticks, sized 440x360 at the given x offset.
    const double W = 400, H = 280, L = x_off + 60, Ttop = 50;
    double xmin = 1e300, xmax = 0, ymin = 1e300, ymax = 0;
    for (const auto& s : series)
        for (auto [x, y] : s.pts) {
            if (x <= 0 || y <= 0) continue;
            xmin = std::min(xmin, x), xmax = std::max(xmax, x);
            ymin = std::min(ymin, y), ymax = std::max(ymax, y);
        }
    if (xmax <= 0) return "";
    const double lx0 = std::log10(xmin), lx1 = std::log10(xmax);
    double ly0 = std::floor(std::log10(ymin)), ly1 = std::ceil(std::log10(ymax));
    if (ly1 <= ly0) ly1 = ly0 + 1;
    auto px = [&](double x) { return L + (std::log10(x) - lx0) / std::max(1e-12, lx1 - lx0) * W; };
    auto py = [&](double y) { return Ttop + H - (std::log10(y) - ly0) / (ly1 - ly0) * H; };

    std::ostringstream s;
    s << "<g>";
    s << "<text x='" << L + W / 2 << "' y='28' text-anchor='middle' font-size='15'>" << title
      << "</text>";
    s << "<rect x='" << L << "' y='" << Ttop << "' width='" << W << "' height='" << H
      << "' fill='none' stroke='#333'/>";
    for (int d = static_cast<int>(ly0); d <= static_cast<int>(ly1); ++d) {
        double y = py(std::pow(10.0, d));
        s << "<line x1='" << L << "' y1='" << y << "' x2='" << L + W << "' y2='" << y
          << "' stroke='#ddd'/>";
        s << "<text x='" << L - 6 << "' y='" << y + 4 << "' text-anchor='end' font-size='11'>1e" << d
          << "</text>";
    }
    for (double x = std::pow(2.0, std::ceil(std::log2(xmin))); x <= xmax * 1.001; x *= 2) {
        s << "<line x1='" << px(x) << "' y1='" << Ttop << "' x2='" << px(x) << "' y2='"
          << Ttop + H << "' stroke='#eee'/>";
        s << "<text x='" << px(x) << "' y='" << Ttop + H + 16 << "' text-anchor='middle' font-size='11'>"
          << static_cast<int64_t>(x) << "</text>";
    }
    s << "<text x='" << L + W / 2 << "' y='" << Ttop + H + 34
      << "' text-anchor='middle' font-size='12'>sequence length</text>";
    s << "<text x='" << L - 44 << "' y='" << Ttop + H / 2
      << "' text-anchor='middle' font-size='12' transform='rotate(-90 " << L - 44 << " "
      << Ttop + H / 2 << ")'>" << y_label << "</text>";
    int li = 0;
    for (const auto& ser : series) {
        if (ser.pts.empty()) continue;
        s << "<polyline fill='none' stroke='" << ser.color << "' stroke-width='2' points='";
        for (auto [x, y] : ser.pts) s << px(x) << "," << py(y) << " ";
        s << "'/>";
        for (auto [x, y] : ser.pts)
            s << "<circle cx='" << px(x) << "' cy='" << py(y) << "' r='3' fill='" << ser.color
              << "'/>";
        s << "<rect x='" << L + 10 << "' y='" << Ttop + 10 + 18 * li << "' width='14' height='3' fill='"
          << ser.color << "'/>";
        s << "<text x='" << L + 30 << "' y='" << Ttop + 16 + 18 * li << "' font-size='12'>"
          << ser.label << "</text>";
        ++li;
    }
    s << "</g>";
    return s.str();
}

} // namespace

std::string bench_svg(const std::vector<BenchRecord>& records) {
    auto collect = [&](Arch a, bool mem_metric) {
        Series s;
        s.label = arch_name(a);
        s.color = a == Arch::Gam ? "#1f77b4" : "#d62728";
        for (const auto& r : records)
            if (r.arch == a && r.ok)
                s.pts.emplace_back(static_cast<double>(r.seq_len),
                                   mem_metric ? r.peak_mem_mb : r.time_ms_mean);
        return s;
    };
    std::ostringstream out;
    out << "<svg xmlns='http://www.w3.org/2000/svg' width='1060' height='400' "
           "font-family='sans-serif'>\n";
    out << svg_panel({collect(Arch::Gam, false), collect(Arch::Transformer, false)},
                     "forward+backward time", "time (ms)", 0.0);
    out << svg_panel({collect(Arch::Gam, true), collect(Arch::Transformer, true)},
                     "peak tracked tensor memory", "memory (MiB)", 530.0);
    out << "</svg>\n";
    return out.str();
}

std::vector<BenchRecord> run_sweep(const std::vector<Arch>& archs,
                                   const std::vector<int64_t>& seq_lens, const BenchConfig& cfg,
                                   const std::string& out_dir) {
    std::vector<BenchRecord> records;
    for (Arch a : archs) {
        for (int64_t n : seq_lens) {
            std::cerr << "bench: " << arch_name(a) << " seq_len " << n << " ..." << std::flush;
            BenchRecord r = measure_block(a, cfg, n);
            if (r.ok)
                std::cerr << " " << r.time_ms_median << " ms median, " << r.peak_mem_mb << " MiB\n";
            else
                std::cerr << " skipped (oom)\n";
            records.push_back(r);
        }
    }
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        {
            std::ofstream f(out_dir + "/scaling.csv", std::ios::binary);
            if (!f) throw IoError(str_cat("cannot open for writing: ", out_dir, "/scaling.csv"));
            f << bench_csv(records, cfg);
        }
        {
            std::ofstream f(out_dir + "/scaling.svg", std::ios::binary);
            if (!f) throw IoError(str_cat("cannot open for writing: ", out_dir, "/scaling.svg"));
            f << bench_svg(records);
        }
    }
    return records;
}

LinearFit linear_fit(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size() || xs.size() < 2)
        throw ConfigError("linear_fit: need >= 2 matching points");
    const double n = static_cast<double>(xs.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    LinearFit f;
    const double denom = n * sxx - sx * sx;
    f.slope = (n * sxy - sx * sy) / denom;
    f.intercept = (sy - f.slope * sx) / n;
    double ss_res = 0, ss_tot = 0;
    const double mean_y = sy / n;
    for (size_t i = 0; i < xs.size(); ++i) {
        const double pred = f.slope * xs[i] + f.intercept;
        ss_res += (ys[i] - pred) * (ys[i] - pred);
        ss_tot += (ys[i] - mean_y) * (ys[i] - mean_y);
    }
    f.r2 = ss_tot == 0 ? 1.0 : 1.0 - ss_res / ss_tot;
    return f;
}

} // namespace gamlab
