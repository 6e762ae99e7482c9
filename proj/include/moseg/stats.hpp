#pragma once

#include <vector>

namespace moseg {

/// Linear-interpolation (type-7) quantile of a sorted, nonempty vector;
/// p in [0, 1].
double quantile_sorted(const std::vector<double>& sorted, double p);

}  // namespace moseg
