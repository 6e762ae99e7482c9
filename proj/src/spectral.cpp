#include "moseg/spectral.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "moseg/errors.hpp"
#include "moseg/rng.hpp"

namespace moseg {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void fix_column_signs(Eigen::MatrixXd& u) {
    for (Eigen::Index c = 0; c < u.cols(); ++c) {
        Eigen::Index best = 0;
        double best_abs = -1.0;
        for (Eigen::Index r = 0; r < u.rows(); ++r)
            if (std::abs(u(r, c)) > best_abs) {
                best_abs = std::abs(u(r, c));
                best = r;
            }
        if (u(best, c) < 0) u.col(c) = -u.col(c);
    }
}

Eigen::MatrixXd normalize_rows(const Eigen::MatrixXd& m) {
    Eigen::MatrixXd out = m;
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        const double norm = out.row(i).norm();
        if (norm > 0) out.row(i) /= norm;
    }
    return out;
}

std::vector<Laplacian> laplacians_of(const std::vector<AffinityKernel>& kernels) {
    if (kernels.empty()) throw InputError("at least one kernel required");
    const int n = kernels.front().size();
    for (const auto& k : kernels)
        if (k.size() != n) throw InputError("kernels disagree on N");
    std::vector<Laplacian> laps;
    laps.reserve(kernels.size());
    for (const auto& k : kernels) laps.push_back(laplacian(k));
    return laps;
}

}  // namespace

Laplacian laplacian(const AffinityKernel& kern) {
    const int n = kern.size();
    if (n < 1) throw InputError("laplacian: empty kernel");
    Eigen::VectorXd d = kern.K.rowwise().sum();
    Eigen::VectorXd dinv_sqrt(n);
    for (int i = 0; i < n; ++i) dinv_sqrt(i) = d(i) > 0.0 ? 1.0 / std::sqrt(d(i)) : 0.0;
    Eigen::MatrixXd l =
        Eigen::MatrixXd::Identity(n, n) -
        dinv_sqrt.asDiagonal() * kern.K * dinv_sqrt.asDiagonal();
    // Degree-0 points sit on an identity row (eigenvalue 1, never glued).
    for (int i = 0; i < n; ++i)
        if (d(i) <= 0.0) {
            l.row(i).setZero();
            l.col(i).setZero();
            l(i, i) = 1.0;
        }
    l = ((l + l.transpose()) / 2.0).eval();
    return Laplacian{kern.kind, std::move(l)};
}

std::pair<Eigen::MatrixXd, Eigen::VectorXd> smallest_eigenvectors(const Eigen::MatrixXd& s,
                                                                  int m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(s);
    if (solver.info() != Eigen::Success)
        throw NumericalError("eigensolver failed to converge (size " +
                             std::to_string(s.rows()) + ", norm " + std::to_string(s.norm()) +
                             ")");
    Eigen::MatrixXd u = solver.eigenvectors().leftCols(m);
    fix_column_signs(u);
    return {std::move(u), solver.eigenvalues().head(m)};
}

Eigen::VectorXd eigenvalues_ascending(const Eigen::MatrixXd& s) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(s, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success)
        throw NumericalError("eigensolver failed to converge");
    return solver.eigenvalues();
}

SpectralEmbedding embed(const Laplacian& lap, int m) {
    const int n = static_cast<int>(lap.L.rows());
    if (m < 1 || m > n) throw InputError("embed: M must be in [1, N]");
    auto [u, evals] = smallest_eigenvectors(lap.L, m);
    return SpectralEmbedding{lap.kind, m, std::move(u)};
}

namespace {

struct KMeansRun {
    std::vector<int> labels;  // 0-based during the run
    double wcss = kInf;
};

KMeansRun kmeans_once(const Eigen::MatrixXd& rows, int m, Rng rng) {
    const int n = static_cast<int>(rows.rows());
    Eigen::MatrixXd centers(m, rows.cols());

    // k-means++ seeding.
    std::vector<double> dist2(n, kInf);
    centers.row(0) = rows.row(static_cast<Eigen::Index>(rng.uniform_index(n)));
    for (int c = 1; c < m; ++c) {
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            const double d = (rows.row(i) - centers.row(c - 1)).squaredNorm();
            if (d < dist2[i]) dist2[i] = d;
            total += dist2[i];
        }
        int pick = -1;
        if (total > 0.0) {
            const double target = rng.uniform_double() * total;
            double cum = 0.0;
            for (int i = 0; i < n; ++i) {
                cum += dist2[i];
                if (cum >= target) {
                    pick = i;
                    break;
                }
            }
        }
        if (pick < 0) pick = static_cast<int>(rng.uniform_index(n));
        centers.row(c) = rows.row(pick);
    }

    std::vector<int> labels(n, 0), prev(n, -1);
    std::vector<int> counts(m, 0);
    for (int iter = 0; iter < 200; ++iter) {
        // Assign.
        for (int i = 0; i < n; ++i) {
            int best = 0;
            double best_d = (rows.row(i) - centers.row(0)).squaredNorm();
            for (int c = 1; c < m; ++c) {
                const double d = (rows.row(i) - centers.row(c)).squaredNorm();
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            labels[i] = best;
        }
        // Repair empties: split the largest cluster at its farthest point.
        std::fill(counts.begin(), counts.end(), 0);
        for (int i = 0; i < n; ++i) ++counts[labels[i]];
        for (int c = 0; c < m; ++c) {
            if (counts[c] > 0) continue;
            int largest = 0;
            for (int c2 = 1; c2 < m; ++c2)
                if (counts[c2] > counts[largest]) largest = c2;
            // Centroid of the largest cluster.
            Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(rows.cols());
            for (int i = 0; i < n; ++i)
                if (labels[i] == largest) mean += rows.row(i);
            mean /= counts[largest];
            int far = -1;
            double far_d = -1.0;
            for (int i = 0; i < n; ++i)
                if (labels[i] == largest) {
                    const double d = (rows.row(i) - mean).squaredNorm();
                    if (d > far_d) {
                        far_d = d;
                        far = i;
                    }
                }
            labels[far] = c;
            --counts[largest];
            ++counts[c];
            centers.row(c) = rows.row(far);
        }
        if (labels == prev) break;
        prev = labels;
        // Update means.
        centers.setZero();
        std::fill(counts.begin(), counts.end(), 0);
        for (int i = 0; i < n; ++i) {
            centers.row(labels[i]) += rows.row(i);
            ++counts[labels[i]];
        }
        for (int c = 0; c < m; ++c)
            if (counts[c] > 0) centers.row(c) /= counts[c];
    }

    KMeansRun run;
    run.labels = labels;
    run.wcss = 0.0;
    centers.setZero();
    std::fill(counts.begin(), counts.end(), 0);
    for (int i = 0; i < n; ++i) {
        centers.row(labels[i]) += rows.row(i);
        ++counts[labels[i]];
    }
    for (int c = 0; c < m; ++c)
        if (counts[c] > 0) centers.row(c) /= counts[c];
    for (int i = 0; i < n; ++i) run.wcss += (rows.row(i) - centers.row(labels[i])).squaredNorm();
    return run;
}

}  // namespace

Assignment cluster_kmeans(const Eigen::MatrixXd& features, int m, int restarts,
                          std::uint64_t seed) {
    const int n = static_cast<int>(features.rows());
    if (m < 1 || m > n) throw InputError("cluster_kmeans: M must be in [1, N]");
    if (restarts < 1) throw InputError("cluster_kmeans: restarts must be >= 1");
    const Eigen::MatrixXd rows = normalize_rows(features);

    // Count distinct rows (exact comparison).
    {
        std::vector<int> idx(n);
        for (int i = 0; i < n; ++i) idx[i] = i;
        std::sort(idx.begin(), idx.end(), [&](int a, int b) {
            for (Eigen::Index c = 0; c < rows.cols(); ++c) {
                if (rows(a, c) < rows(b, c)) return true;
                if (rows(a, c) > rows(b, c)) return false;
            }
            return false;
        });
        int distinct = n > 0 ? 1 : 0;
        for (int i = 1; i < n; ++i)
            if (rows.row(idx[i]) != rows.row(idx[i - 1])) ++distinct;
        if (m > distinct)
            throw NumericalError("cluster_kmeans: M = " + std::to_string(m) +
                                 " exceeds the number of distinct rows (" +
                                 std::to_string(distinct) + ")");
    }

    const Rng root(seed);
    KMeansRun best;
    for (int r = 0; r < restarts; ++r) {
        KMeansRun run = kmeans_once(rows, m, root.derive(static_cast<std::uint64_t>(r)));
        if (run.wcss < best.wcss) best = std::move(run);
    }

    Assignment out;
    out.num_clusters = m;
    out.labels.resize(n);
    for (int i = 0; i < n; ++i) out.labels[i] = best.labels[i] + 1;
    return out;
}

Assignment fuse_kernel_addition(const std::vector<AffinityKernel>& kernels, int m,
                                int restarts, std::uint64_t seed) {
    if (kernels.empty()) throw InputError("fuse_kernel_addition: at least one kernel");
    AffinityKernel sum;
    sum.kind = kernels.front().kind;
    sum.K = kernels.front().K;
    for (size_t v = 1; v < kernels.size(); ++v) {
        if (kernels[v].size() != sum.K.rows())
            throw InputError("fuse_kernel_addition: kernels disagree on N");
        sum.K += kernels[v].K;
    }
    sum.degree = sum.K.rowwise().sum();
    const SpectralEmbedding emb = embed(laplacian(sum), m);
    return cluster_kmeans(emb.U, m, restarts, seed);
}

FusionResult fuse_coreg(const std::vector<AffinityKernel>& kernels, int m, double lambda,
                        const FusionParams& params) {
    if (kernels.size() < 2) throw InputError("fuse_coreg: at least two kernels required");
    if (lambda < 0) throw InputError("fuse_coreg: lambda must be >= 0");
    const std::vector<Laplacian> laps = laplacians_of(kernels);
    const int views = static_cast<int>(kernels.size());
    const int n = static_cast<int>(laps.front().L.rows());

    std::vector<Eigen::MatrixXd> us(views);
    for (int v = 0; v < views; ++v) us[v] = embed(laps[v], m).U;

    // Counting each unordered view pair once makes every sweep step an exact
    // block minimizer, hence the monotone trace.
    auto cost_of = [&](const std::vector<Eigen::MatrixXd>& u) {
        double cost = 0.0;
        for (int v = 0; v < views; ++v) cost += (u[v].transpose() * laps[v].L * u[v]).trace();
        for (int v = 0; v < views; ++v)
            for (int w = v + 1; w < views; ++w)
                cost -= lambda * (u[v] * (u[v].transpose() * u[w]) * u[w].transpose()).trace();
        return cost;
    };

    FusionResult result;
    result.cost_trace.push_back(cost_of(us));
    for (int iter = 0; iter < params.max_iters; ++iter) {
        for (int v = 0; v < views; ++v) {
            Eigen::MatrixXd s = laps[v].L;
            for (int w = 0; w < views; ++w)
                if (w != v) s -= lambda * (us[w] * us[w].transpose());
            s = ((s + s.transpose()) / 2.0).eval();
            us[v] = smallest_eigenvectors(s, m).first;
        }
        const double cost = cost_of(us);
        const double prev = result.cost_trace.back();
        result.cost_trace.push_back(cost);
        if (prev - cost < params.tol * std::max(1.0, std::abs(prev))) {
            result.converged = true;
            break;
        }
    }

    Eigen::MatrixXd cat(n, static_cast<Eigen::Index>(views) * m);
    for (int v = 0; v < views; ++v) cat.middleCols(static_cast<Eigen::Index>(v) * m, m) = us[v];
    result.assignment = cluster_kmeans(cat, m, params.restarts, params.seed);
    result.embeddings = std::move(us);
    return result;
}

std::array<Eigen::MatrixXd, 3> subset_constraints(const std::vector<Eigen::MatrixXd>& us) {
    if (us.size() != 3) throw InputError("subset_constraints: exactly three views required");
    std::array<Eigen::MatrixXd, 3> recon;
    for (int v = 0; v < 3; ++v) recon[v] = us[v] * us[v].transpose();
    auto positive_part = [](const Eigen::MatrixXd& k) { return k.cwiseMax(0.0); };
    auto negative_part = [](const Eigen::MatrixXd& k) { return k.cwiseMin(0.0); };
    std::array<Eigen::MatrixXd, 3> q;
    q[0] = negative_part(recon[1]);
    q[1] = positive_part(recon[0]) + negative_part(recon[2]);
    q[2] = positive_part(recon[1]);
    return q;
}

FusionResult fuse_subset(const std::vector<AffinityKernel>& kernels, int m, double gamma,
                         const FusionParams& params) {
    if (kernels.size() != 3)
        throw InputError("fuse_subset: exactly three kernels (affine, homography, fundamental)");
    if (kernels[0].kind != ModelKind::Affine || kernels[1].kind != ModelKind::Homography ||
        kernels[2].kind != ModelKind::Fundamental)
        throw InputError("fuse_subset: kernels must be ordered affine, homography, fundamental");
    if (gamma < 0) throw InputError("fuse_subset: gamma must be >= 0");
    const std::vector<Laplacian> laps = laplacians_of(kernels);
    const int n = static_cast<int>(laps.front().L.rows());

    std::vector<Eigen::MatrixXd> us(3);
    for (int v = 0; v < 3; ++v) us[v] = embed(laps[v], m).U;

    FusionResult result;
    double best_cost = kInf;
    std::vector<Eigen::MatrixXd> best_us = us;
    for (int iter = 0; iter < params.max_iters; ++iter) {
        double cost = 0.0;
        for (int v = 0; v < 3; ++v) {
            // Q_v uses the freshest embeddings (strictly sequential sweep).
            const Eigen::MatrixXd q = subset_constraints(us)[v];
            Eigen::MatrixXd shifted = laps[v].L - gamma * q;
            shifted = ((shifted + shifted.transpose()) / 2.0).eval();
            auto [u, evals] = smallest_eigenvectors(shifted, m);
            us[v] = std::move(u);
            cost += evals.sum();  // tr(U_v' L~_v U_v)
        }
        const double prev = result.cost_trace.empty() ? kInf : result.cost_trace.back();
        result.cost_trace.push_back(cost);
        if (cost < best_cost) {
            best_cost = cost;
            best_us = us;
        }
        if (std::abs(prev - cost) < params.tol * std::max(1.0, std::abs(prev))) {
            result.converged = true;
            break;
        }
    }
    if (!result.converged) us = best_us;

    Eigen::MatrixXd cat(n, static_cast<Eigen::Index>(3) * m);
    for (int v = 0; v < 3; ++v) cat.middleCols(static_cast<Eigen::Index>(v) * m, m) = us[v];
    result.assignment = cluster_kmeans(cat, m, params.restarts, params.seed);
    result.embeddings = std::move(us);
    return result;
}

}  // namespace moseg
