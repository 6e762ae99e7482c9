#include "moseg/stats.hpp"

#include <cmath>

namespace moseg {

double quantile_sorted(const std::vector<double>& sorted, double p) {
    const int n = static_cast<int>(sorted.size());
    if (n == 1) return sorted[0];
    const double pos = p * (n - 1);
    const int lo = static_cast<int>(std::floor(pos));
    if (lo >= n - 1) return sorted[n - 1];
    const double frac = pos - lo;
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

}  // namespace moseg
