#include "rrh/common.hpp"

#include <atomic>
#include <cstdlib>

namespace rrh {

std::vector<BlockRange> block_partition(std::size_t n, std::size_t block_size) {
    std::vector<BlockRange> blocks;
    if (block_size == 0) block_size = 1;
    blocks.reserve(n / block_size + 1);
    for (std::size_t b = 0; b < n; b += block_size) {
        blocks.push_back({b, std::min(n, b + block_size)});
    }
    return blocks;
}

namespace {

std::size_t worker_count() {
    if (const char* env = std::getenv("RRH_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return static_cast<std::size_t>(v);
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : hc;
}

}  // namespace

void parallel_for_blocks(std::size_t n, const std::function<void(std::size_t, BlockRange)>& fn,
                         std::size_t block_size) {
    const auto blocks = block_partition(n, block_size);
    const std::size_t workers = std::min(worker_count(), blocks.size());
    if (workers <= 1) {
        for (std::size_t b = 0; b < blocks.size(); ++b) fn(b, blocks[b]);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t b = next.fetch_add(1);
                if (b >= blocks.size()) return;
                fn(b, blocks[b]);
            }
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace rrh
