#include "moseg/rng.hpp"

#include <algorithm>

namespace moseg {

std::vector<int> Rng::sample_without_replacement(const std::vector<int>& candidates, int k) {
    std::vector<int> pool = candidates;
    const int n = static_cast<int>(pool.size());
    for (int t = 0; t < k; ++t) {
        const int j = t + static_cast<int>(uniform_index(static_cast<std::uint64_t>(n - t)));
        std::swap(pool[t], pool[j]);
    }
    pool.resize(k);
    std::sort(pool.begin(), pool.end());
    return pool;
}

}  // namespace moseg
