#include "gamlab/threading.hpp"

#include "gamlab/common.hpp"

#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <thread>
#include <vector>

namespace gamlab {

namespace {

int resolve_initial_threads() {
    if (const char* env = std::getenv("GAMLAB_THREADS")) {
        char* end = nullptr;
        long v = std::strtol(env, &end, 10);
        if (end && *end == '\0' && v >= 1 && v <= 256) return static_cast<int>(v);
    }
    return 1;
}

thread_local bool g_inside_parallel = false;

std::atomic<int> g_threads{resolve_initial_threads()};

// Lazily started pool. Workers park on a condition variable between jobs.
class Pool {
public:
    explicit Pool(int workers) : job_fn_(nullptr) {
        for (int i = 1; i < workers; ++i) {
            threads_.emplace_back([this, i] { worker_loop(i); });
        }
        worker_total_ = workers;
    }

    ~Pool() {
        {
            std::lock_guard<std::mutex> lk(m_);
            stop_ = true;
        }
        cv_.notify_all();
        for (auto& t : threads_) t.join();
    }

    void run(int64_t n, const std::function<void(int64_t, int64_t)>& fn) {
        job_n_ = n;
        job_fn_ = &fn;
        pending_.store(worker_total_ - 1, std::memory_order_release);
        {
            std::lock_guard<std::mutex> lk(m_);
            ++generation_;
        }
        cv_.notify_all();
        run_slice(0);
        while (pending_.load(std::memory_order_acquire) != 0) std::this_thread::yield();
        job_fn_ = nullptr;
    }

    int size() const { return worker_total_; }

private:
    void run_slice(int idx) {
        int64_t chunk = (job_n_ + worker_total_ - 1) / worker_total_;
        int64_t begin = idx * chunk;
        int64_t end = std::min<int64_t>(job_n_, begin + chunk);
        if (begin < end) {
            g_inside_parallel = true;
            (*job_fn_)(begin, end);
            g_inside_parallel = false;
        }
    }

    void worker_loop(int idx) {
        uint64_t seen = 0;
        for (;;) {
            {
                std::unique_lock<std::mutex> lk(m_);
                cv_.wait(lk, [&] { return stop_ || generation_ != seen; });
                if (stop_) return;
                seen = generation_;
            }
            run_slice(idx);
            pending_.fetch_sub(1, std::memory_order_release);
        }
    }

    std::vector<std::thread> threads_;
    std::mutex m_;
    std::condition_variable cv_;
    uint64_t generation_ = 0;
    bool stop_ = false;
    std::atomic<int> pending_{0};
    int64_t job_n_ = 0;
    const std::function<void(int64_t, int64_t)>* job_fn_;
    int worker_total_ = 1;
};

Pool* pool_instance(int want) {
    static Pool* pool = nullptr;
    static std::mutex m;
    std::lock_guard<std::mutex> lk(m);
    if (!pool || pool->size() != want) {
        delete pool;
        pool = new Pool(want);
    }
    return pool;
}

} // namespace

int thread_count() { return g_threads.load(std::memory_order_relaxed); }

void set_thread_count(int n) {
    if (n < 1) throw ConfigError("thread count must be >= 1");
    g_threads.store(n, std::memory_order_relaxed);
}

void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& fn) {
    if (n <= 0) return;
    int workers = thread_count();
    if (g_inside_parallel || workers <= 1 || n < 2) {
        fn(0, n);
        return;
    }
    g_inside_parallel = true;
    pool_instance(workers)->run(n, fn);
    g_inside_parallel = false;
}

} // namespace gamlab
