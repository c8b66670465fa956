#include "runsup/parallel.hpp"

#include <algorithm>
#include <exception>
#include <mutex>
#include <stdexcept>

namespace runsup {

namespace {
std::atomic<int> g_threads{0};  // 0 = hardware_concurrency
}

void set_thread_count(int n) {
    if (n < 0) throw std::invalid_argument("thread count must be >= 0");
    g_threads.store(n);
}

int thread_count() {
    int n = g_threads.load();
    if (n > 0) return n;
    unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? static_cast<int>(hc) : 1;
}

std::size_t chunk_count(std::size_t n_items, std::size_t chunk_size) {
    if (chunk_size == 0) chunk_size = 1;
    return (n_items + chunk_size - 1) / chunk_size;
}

void parallel_chunks(std::size_t n_items, std::size_t chunk_size,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& fn) {
    if (n_items == 0) return;
    if (chunk_size == 0) chunk_size = 1;
    const std::size_t n_chunks = chunk_count(n_items, chunk_size);
    const int n_workers = std::min<std::size_t>(static_cast<std::size_t>(thread_count()), n_chunks);

    if (n_workers <= 1) {
        for (std::size_t c = 0; c < n_chunks; ++c)
            fn(c * chunk_size, std::min(n_items, (c + 1) * chunk_size), c);
        return;
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;

    auto worker = [&]() {
        for (;;) {
            std::size_t c = next.fetch_add(1);
            if (c >= n_chunks) return;
            try {
                fn(c * chunk_size, std::min(n_items, (c + 1) * chunk_size), c);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                return;
            }
        }
    };

    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_workers));
    for (int i = 0; i < n_workers; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace runsup
