#include "moseg/modelsel.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "moseg/errors.hpp"
#include "moseg/rng.hpp"

namespace moseg {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_assignment(const Assignment& x, int n) {
    if (static_cast<int>(x.labels.size()) != n)
        throw InputError("assignment length does not match kernel size");
    for (int v : x.labels)
        if (v < 1 || v > x.num_clusters) throw InputError("assignment label out of range");
}

/// Indicator matrix X (N x M) of an assignment.
Eigen::MatrixXd indicator(const Assignment& x) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(x.labels.size(), x.num_clusters);
    for (size_t i = 0; i < x.labels.size(); ++i) m(static_cast<Eigen::Index>(i), x.labels[i] - 1) = 1.0;
    return m;
}

/// 2 tr(X X' K) / (||X X'||_F ||K||_F), the fidelity part of the residual.
double normalized_inner(const Assignment& x, const AffinityKernel& kern) {
    const int n = kern.size();
    check_assignment(x, n);
    const double kf = kern.K.norm();
    if (kf <= 0.0) throw InputError("reconstruction_error: all-zero kernel");

    std::vector<std::vector<int>> clusters(x.num_clusters);
    for (int i = 0; i < n; ++i) clusters[x.labels[i] - 1].push_back(i);

    double trace = 0.0;
    double xxf_sq = 0.0;
    for (const auto& members : clusters) {
        xxf_sq += static_cast<double>(members.size()) * static_cast<double>(members.size());
        for (int i : members)
            for (int j : members) trace += kern.K(i, j);
    }
    return 2.0 * trace / (std::sqrt(xxf_sq) * kf);
}

}  // namespace

double reconstruction_error(const Assignment& x, const AffinityKernel& kern) {
    return std::max(0.0, 2.0 - normalized_inner(x, kern));
}

double normalized_cut(const Assignment& x, const AffinityKernel& kern) {
    const int n = kern.size();
    check_assignment(x, n);
    const Eigen::VectorXd degree = kern.K.rowwise().sum();
    std::vector<double> vol(x.num_clusters, 0.0), within(x.num_clusters, 0.0);
    for (int i = 0; i < n; ++i) vol[x.labels[i] - 1] += degree(i);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (x.labels[i] == x.labels[j]) within[x.labels[i] - 1] += kern.K(i, j);
    double total = 0.0;
    for (int m = 0; m < x.num_clusters; ++m) {
        if (vol[m] <= 0.0) return kInf;
        total += (vol[m] - within[m]) / vol[m];
    }
    return total;
}

double normalized_cut_trace(const Assignment& x, const AffinityKernel& kern) {
    const int n = kern.size();
    check_assignment(x, n);
    const Eigen::MatrixXd xm = indicator(x);
    const Eigen::MatrixXd d = kern.K.rowwise().sum().asDiagonal();
    const Eigen::MatrixXd l = d - kern.K;
    const Eigen::MatrixXd xdx = xm.transpose() * d * xm;
    for (int m = 0; m < x.num_clusters; ++m)
        if (xdx(m, m) <= 0.0) return kInf;
    return (xdx.inverse() * (xm.transpose() * l * xm)).trace();
}

const char* to_string(FusionScheme scheme) {
    switch (scheme) {
        case FusionScheme::Single: return "single";
        case FusionScheme::KernelAddition: return "keradd";
        case FusionScheme::CoReg: return "coreg";
        case FusionScheme::Subset: return "subset";
    }
    return "?";
}

const CandidateScore& SelectionResult::best() const {
    for (const auto& c : candidates)
        if (c.M == best_m) return c;
    throw NumericalError("selection result has no best candidate");
}

SelectionResult select_model(const std::vector<AffinityKernel>& kernels,
                             const SelectionParams& params) {
    if (kernels.empty()) throw InputError("select_model: at least one kernel");
    const int n = kernels.front().size();
    for (const auto& k : kernels)
        if (k.size() != n) throw InputError("select_model: kernels disagree on N");
    if (params.m_min < 1 || params.m_min > params.m_max || params.m_max > n)
        throw InputError("select_model: need 1 <= m_min <= m_max <= N");
    if (params.scheme == FusionScheme::Single && kernels.size() != 1)
        throw InputError("select_model: single scheme expects one kernel");
    if (params.scheme == FusionScheme::CoReg && kernels.size() < 2)
        throw InputError("select_model: coreg needs at least two kernels");

    const Rng root(params.seed);

    // Single-model and kernel addition cluster a fixed Laplacian, so one
    // eigendecomposition serves every M; the alternating schemes re-solve
    // because their embeddings depend on M.
    Eigen::MatrixXd fixed_basis;
    if (params.scheme == FusionScheme::Single || params.scheme == FusionScheme::KernelAddition) {
        AffinityKernel sum;
        sum.kind = kernels.front().kind;
        sum.K = kernels.front().K;
        for (size_t v = 1; v < kernels.size(); ++v) sum.K += kernels[v].K;
        sum.degree = sum.K.rowwise().sum();
        fixed_basis = smallest_eigenvectors(laplacian(sum).L, params.m_max).first;
    }

    SelectionResult result;
    for (int m = params.m_min; m <= params.m_max; ++m) {
        CandidateScore cand;
        cand.M = m;
        const std::uint64_t seed_m = root.derive(static_cast<std::uint64_t>(m)).next_u64();
        try {
            switch (params.scheme) {
                case FusionScheme::Single:
                case FusionScheme::KernelAddition:
                    cand.assignment =
                        cluster_kmeans(fixed_basis.leftCols(m), m, params.restarts, seed_m);
                    break;
                case FusionScheme::CoReg: {
                    FusionParams fp{params.max_iters, params.tol, params.restarts, seed_m};
                    cand.assignment = fuse_coreg(kernels, m, params.lambda, fp).assignment;
                    break;
                }
                case FusionScheme::Subset: {
                    FusionParams fp{params.max_iters, params.tol, params.restarts, seed_m};
                    cand.assignment = fuse_subset(kernels, m, params.gamma, fp).assignment;
                    break;
                }
            }
        } catch (const NumericalError&) {
            cand.degenerate = true;
            cand.residual = kInf;
            result.candidates.push_back(std::move(cand));
            continue;
        }

        double ncut_total = 0.0, fid_total = 0.0, recon_total = 0.0;
        for (const auto& kern : kernels) {
            const double nc = normalized_cut(cand.assignment, kern);
            if (!std::isfinite(nc)) {
                cand.degenerate = true;
                break;
            }
            ncut_total += nc;
            const double fid = normalized_inner(cand.assignment, kern);
            fid_total += fid;
            recon_total += std::max(0.0, 2.0 - fid);
        }
        if (cand.degenerate) {
            cand.residual = kInf;
        } else {
            cand.ncut = ncut_total;
            cand.recon = recon_total;
            cand.residual = ncut_total - params.delta * fid_total;
        }
        result.candidates.push_back(std::move(cand));
    }

    double best = kInf;
    result.best_m = 0;
    for (const auto& c : result.candidates)
        if (!c.degenerate && c.residual < best) {
            best = c.residual;
            result.best_m = c.M;
        }
    if (result.best_m == 0)
        throw NumericalError("select_model: every candidate M was degenerate");
    return result;
}

int gap_heuristic(const AffinityKernel& kern, int m_max) {
    const int n = kern.size();
    if (m_max < 1) throw InputError("gap_heuristic: m_max must be >= 1");
    const Eigen::VectorXd evals = eigenvalues_ascending(laplacian(kern).L);
    const int limit = std::min(m_max, n - 1);
    int best_m = 1;
    double best_gap = -kInf;
    for (int m = 1; m <= limit; ++m) {
        const double gap = evals(m) - evals(m - 1);
        if (gap > best_gap) {
            best_gap = gap;
            best_m = m;
        }
    }
    return best_m;
}

std::string selection_report_json(const SelectionResult& result) {
    nlohmann::json j;
    j["best_m"] = result.best_m;
    auto& cands = j["candidates"] = nlohmann::json::array();
    for (const auto& c : result.candidates) {
        nlohmann::json jc;
        jc["m"] = c.M;
        if (c.degenerate) {
            jc["degenerate"] = true;
        } else {
            jc["ncut"] = c.ncut;
            jc["recon"] = c.recon;
            jc["residual"] = c.residual;
        }
        cands.push_back(std::move(jc));
    }
    return j.dump(2) + "\n";
}

}  // namespace moseg
