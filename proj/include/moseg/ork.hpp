#pragma once

#include <Eigen/Core>
#include <string>

#include "moseg/hypgen.hpp"

namespace moseg {

/// N x N symmetric nonnegative affinity for one model kind, zero diagonal,
/// with cached row sums.
struct AffinityKernel {
    ModelKind kind = ModelKind::Homography;
    Eigen::MatrixXd K;       // N x N
    Eigen::VectorXd degree;  // row sums

    int size() const { return static_cast<int>(K.rows()); }
};

struct OrkResult {
    AffinityKernel kernel;
    int zero_residual_points = 0;  // points with no finite residual (zero row)
};

/// Ordered residual kernel. Per point i, h_i = ceil(h_frac * K_i) where K_i
/// counts its finite residuals; the inlier set O_i holds the h_i smallest
/// residuals' hypothesis indices (ties broken by index). The raw affinity
/// |O_i ∩ O_j| is divided by the number of frames where both points are
/// visible; pairs never co-visible get 0.
OrkResult build_ork_kernel(const ResidualMatrix& rm, const TrackSet& ts, double h_frac);

/// Zeroes every entry strictly below the eps_quantile-quantile
/// (linear-interpolation) of the positive off-diagonal entries. An all-zero
/// kernel is returned unchanged. Degrees are recomputed.
AffinityKernel sparsify(const AffinityKernel& kern, double eps_quantile);

/// Dense export for cross-implementation diffing: u32 kind, u64 N, then
/// N*N row-major little-endian doubles.
void write_kernel(const AffinityKernel& kern, const std::string& path);
AffinityKernel read_kernel(const std::string& path);

}  // namespace moseg
