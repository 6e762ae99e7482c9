#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "moseg/spectral.hpp"

namespace moseg {

/// Normalized affinity reconstruction error in [0, 2]:
///   2 - 2 tr(X X' K) / (||X X'||_F ||K||_F),
/// evaluated without materializing X X' (tr(X X' K) = sum_m x_m' K x_m and
/// ||X X'||_F^2 = sum_m |A_m|^2). Throws InputError on an all-zero kernel.
double reconstruction_error(const Assignment& X, const AffinityKernel& kern);

/// Normalized cut sum_m cut(A_m, ~A_m) / vol(A_m) over the kernel graph.
/// Returns +inf when some cluster has zero volume.
double normalized_cut(const Assignment& X, const AffinityKernel& kern);

/// Same value via the trace identity tr((X' D X)^-1 X' L X) with unnormalized
/// graph quantities L = D - K; kept as a second algebraic route.
double normalized_cut_trace(const Assignment& X, const AffinityKernel& kern);

enum class FusionScheme { Single, KernelAddition, CoReg, Subset };

const char* to_string(FusionScheme scheme);

struct SelectionParams {
    double delta = 0.1;
    int m_min = 1;
    int m_max = 10;
    FusionScheme scheme = FusionScheme::KernelAddition;
    double lambda = 1e-2;  // CoReg
    double gamma = 1e-2;   // Subset
    int max_iters = 50;
    double tol = 1e-6;
    int restarts = 20;
    std::uint64_t seed = 0;
};

struct CandidateScore {
    int M = 0;
    double ncut = 0.0;      // sum over views of the normalized cut
    double recon = 0.0;     // sum over views of the reconstruction error
    double residual = 0.0;  // sum_v ncut_v - delta * sum_v 2 tr(XX'K_v)/(||XX'||_F ||K_v||_F)
    Assignment assignment;
    bool degenerate = false;  // rejected candidate (residual = +inf)
};

struct SelectionResult {
    int best_m = 0;
    std::vector<CandidateScore> candidates;  // one per M in [m_min, m_max]

    const CandidateScore& best() const;
};

/// Evaluates every M in [m_min, m_max] with the chosen clustering scheme and
/// picks the minimal residual (ties -> smaller M). Single/kernel-addition
/// schemes reuse one eigendecomposition across M; co-regularization and
/// subset re-solve per M since their embeddings depend on M. Per-M k-means
/// seeds derive from `seed`, so evaluations are order-independent.
SelectionResult select_model(const std::vector<AffinityKernel>& kernels,
                             const SelectionParams& params);

/// Eigengap baseline: with sigma_1 <= sigma_2 <= ... the eigenvalues of the
/// normalized Laplacian, returns argmax_{m in [1, m_max]} (sigma_{m+1} -
/// sigma_m); ties -> smaller m.
int gap_heuristic(const AffinityKernel& kern, int m_max);

/// Selection report: {"best_m": .., "candidates": [{"m", "ncut", "recon",
/// "residual"}, ..]} for the CLI's plot emitter.
std::string selection_report_json(const SelectionResult& result);

}  // namespace moseg
