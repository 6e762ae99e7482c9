#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <vector>

#include "moseg/ork.hpp"

namespace moseg {

/// Normalized Laplacian I - D^{-1/2} K D^{-1/2}. Rows/columns of degree-0
/// points equal the identity row, parking them at eigenvalue 1.
struct Laplacian {
    ModelKind kind = ModelKind::Homography;
    Eigen::MatrixXd L;
};

/// N x M matrix with orthonormal columns: the eigenvectors of the M smallest
/// eigenvalues, each column's largest-magnitude entry made positive.
struct SpectralEmbedding {
    ModelKind kind = ModelKind::Homography;
    int num_clusters = 0;
    Eigen::MatrixXd U;
};

/// Length-N cluster labels in [1, M].
struct Assignment {
    std::vector<int> labels;
    int num_clusters = 0;
};

Laplacian laplacian(const AffinityKernel& kern);

SpectralEmbedding embed(const Laplacian& lap, int M);

/// Eigenvectors of the M smallest eigenvalues of a symmetric matrix, with
/// the deterministic per-column sign convention, plus those eigenvalues.
/// Shared by embed and the fusion solvers (whose shifted Laplacians are
/// symmetric but not PSD).
std::pair<Eigen::MatrixXd, Eigen::VectorXd> smallest_eigenvectors(const Eigen::MatrixXd& S,
                                                                  int M);

/// All eigenvalues of a symmetric matrix, ascending.
Eigen::VectorXd eigenvalues_ascending(const Eigen::MatrixXd& S);

/// K-means over the rows of `features` after normalizing each row to unit
/// length (zero rows stay zero): k-means++ seeding, `restarts` independent
/// runs, best by within-cluster sum of squares; an emptied cluster is
/// repaired by splitting the largest cluster at its farthest point.
/// Throws NumericalError when M exceeds the number of distinct rows.
Assignment cluster_kmeans(const Eigen::MatrixXd& features, int M, int restarts,
                          std::uint64_t seed);

/// Sum the kernels, then run the single-model pipeline on the result.
Assignment fuse_kernel_addition(const std::vector<AffinityKernel>& kernels, int M,
                                int restarts, std::uint64_t seed);

struct FusionParams {
    int max_iters = 50;
    double tol = 1e-6;  // relative cost-change stopping threshold
    int restarts = 20;
    std::uint64_t seed = 0;
};

struct FusionResult {
    Assignment assignment;
    std::vector<double> cost_trace;  // cost_trace[0] = initial cost
    bool converged = false;
    std::vector<Eigen::MatrixXd> embeddings;  // final per-view U_v
};

/// Pairwise co-regularized multi-view embedding. Each sweep replaces U_v by
/// the M smallest eigenvectors of L_v - lambda * sum_{w != v} U_w U_w'; the
/// recorded cost
///   sum_v tr(U_v' L_v U_v) - lambda * sum_{v<w} tr(U_v U_v' U_w U_w')
/// decreases monotonically because each sweep step is an exact block
/// minimizer. Final clustering runs k-means on the row-normalized
/// concatenation of all views.
FusionResult fuse_coreg(const std::vector<AffinityKernel>& kernels, int M, double lambda,
                        const FusionParams& params);

/// Constraint matrices for subset-constrained clustering, built from the
/// reconstructed affinities K^_w = U_w U_w': view 1 (affine) takes the
/// negative part of K^_2, view 2 (homography) the positive part of K^_1 plus
/// the negative part of K^_3, view 3 (fundamental) the positive part of K^_2.
std::array<Eigen::MatrixXd, 3> subset_constraints(const std::vector<Eigen::MatrixXd>& Us);

/// Subset-constrained clustering over exactly [affine, homography,
/// fundamental] kernels: per sweep and view, U_v <- M smallest eigenvectors
/// of L_v - gamma * Q_v with Q_v from subset_constraints. Convergence is not
/// guaranteed (Q_v moves); on hitting max_iters the best-cost sweep's
/// embeddings are used.
FusionResult fuse_subset(const std::vector<AffinityKernel>& kernels, int M, double gamma,
                         const FusionParams& params);

}  // namespace moseg
