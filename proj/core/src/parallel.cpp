#include "riskhjb/parallel.hpp"

#include "riskhjb/types.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace riskhjb {

namespace {
std::atomic<int> g_workers{0};

int env_workers() {
    const char* raw = std::getenv("RISK_HJB_WORKERS");
    if (raw == nullptr || *raw == '\0') return 0;
    char* end = nullptr;
    const long v = std::strtol(raw, &end, 10);
    if (end == raw || *end != '\0' || v < 1 || v > 4096) {
        throw ConfigError(std::string("RISK_HJB_WORKERS must be a positive integer, got '") + raw + "'");
    }
    return static_cast<int>(v);
}
}  // namespace

int worker_count() {
    const int set = g_workers.load();
    if (set > 0) return set;
    const int env = env_workers();
    if (env > 0) return env;
    return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

void set_worker_count(int workers) {
    if (workers < 0) throw ConfigError("worker count must be >= 0");
    g_workers.store(workers);
}

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body) {
    if (n == 0) return;
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(worker_count()), n);
    if (workers <= 1) {
        body(0, n);
        return;
    }
    std::vector<std::thread> threads;
    threads.reserve(workers - 1);
    std::exception_ptr error;
    std::mutex error_mutex;
    auto run = [&](std::size_t w) {
        const std::size_t begin = n * w / workers;
        const std::size_t end = n * (w + 1) / workers;
        try {
            body(begin, end);
        } catch (...) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!error) error = std::current_exception();
        }
    };
    for (std::size_t w = 1; w < workers; ++w) threads.emplace_back(run, w);
    run(0);
    for (auto& t : threads) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace riskhjb
