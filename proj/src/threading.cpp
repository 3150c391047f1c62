#include "grcl/threading.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>
#include <vector>

namespace grcl {

int resolve_threads(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("GRCL_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

void parallel_for(std::int64_t count, int threads,
                  const std::function<void(std::int64_t, std::int64_t)>& fn) {
    if (count <= 0) return;
    const int workers = std::min<std::int64_t>(resolve_threads(threads), count);
    if (workers <= 1 || count < 256) {
        fn(0, count);
        return;
    }
    const std::int64_t chunk = (count + workers - 1) / workers;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        const std::int64_t begin = w * chunk;
        const std::int64_t end = std::min<std::int64_t>(begin + chunk, count);
        if (begin >= end) break;
        pool.emplace_back([&fn, begin, end] { fn(begin, end); });
    }
    for (auto& t : pool) t.join();
}

}  // namespace grcl
