#include "moseg/pipeline.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "moseg/errors.hpp"
#include "moseg/hypgen.hpp"
#include "moseg/rng.hpp"

namespace moseg {

namespace {

TrackSet drop_flagged(const TrackSet& ts) {
    if (!ts.outlier_flags) return ts;
    std::vector<int> rows;
    for (int i = 0; i < ts.num_points(); ++i)
        if (!(*ts.outlier_flags)[i]) rows.push_back(i);
    if (static_cast<int>(rows.size()) == ts.num_points()) return ts;
    if (rows.empty()) throw InputError("pipeline: every point is outlier-flagged");
    TrackSet out;
    const int f = ts.num_frames();
    const int m = static_cast<int>(rows.size());
    out.x.resize(m, f);
    out.y.resize(m, f);
    out.visible.resize(m, f);
    if (ts.labels) out.labels = std::vector<int>(m);
    for (int r = 0; r < m; ++r) {
        out.x.row(r) = ts.x.row(rows[r]);
        out.y.row(r) = ts.y.row(rows[r]);
        out.visible.row(r) = ts.visible.row(rows[r]);
        if (ts.labels) (*out.labels)[r] = (*ts.labels)[rows[r]];
    }
    return out;
}

}  // namespace

void validate_config(const PipelineConfig& cfg) {
    if (cfg.models.empty()) throw InputError("config: at least one model required");
    for (size_t i = 0; i < cfg.models.size(); ++i)
        for (size_t j = i + 1; j < cfg.models.size(); ++j)
            if (cfg.models[i] == cfg.models[j]) throw InputError("config: duplicate model");
    if (cfg.fusion == FusionScheme::Subset &&
        !(cfg.models.size() == 3 && cfg.models[0] == ModelKind::Affine &&
          cfg.models[1] == ModelKind::Homography && cfg.models[2] == ModelKind::Fundamental))
        throw InputError(
            "config: subset fusion requires models affine,homography,fundamental in order");
    if (cfg.fusion == FusionScheme::Single && cfg.models.size() != 1)
        throw InputError("config: single fusion requires exactly one model");
    if (cfg.fusion == FusionScheme::CoReg && cfg.models.size() < 2)
        throw InputError("config: coreg fusion requires at least two models");
    if (cfg.num_motions < 0) throw InputError("config: num_motions must be >= 0 (0 = auto)");
    if (cfg.per_pair < 1) throw InputError("config: per_pair must be >= 1");
    if (!(cfg.h_frac > 0.0 && cfg.h_frac <= 1.0))
        throw InputError("config: h_frac must be in (0, 1]");
    if (!(cfg.eps_quantile >= 0.0 && cfg.eps_quantile < 1.0))
        throw InputError("config: eps_quantile must be in [0, 1)");
    if (cfg.lambda < 0 || cfg.gamma < 0 || cfg.delta < 0)
        throw InputError("config: lambda, gamma and delta must be >= 0");
    if (cfg.m_min < 1 || cfg.m_min > cfg.m_max)
        throw InputError("config: need 1 <= m_min <= m_max");
    if (cfg.restarts < 1) throw InputError("config: restarts must be >= 1");
}

std::vector<AffinityKernel> build_kernels(const PipelineConfig& cfg, const TrackSet& ts,
                                          std::vector<std::string>* warnings) {
    const Rng root(cfg.seed);
    std::vector<AffinityKernel> kernels;
    for (size_t v = 0; v < cfg.models.size(); ++v) {
        const ModelKind kind = cfg.models[v];
        const std::uint64_t hyp_seed =
            root.derive(10, static_cast<std::uint64_t>(kind)).next_u64();
        HypothesisSet hyps = generate_hypotheses(ts, kind, cfg.per_pair, hyp_seed);
        if (warnings)
            warnings->insert(warnings->end(), hyps.warnings.begin(), hyps.warnings.end());
        const ResidualMatrix rm = compute_residuals(ts, hyps.hypotheses);
        OrkResult ork = build_ork_kernel(rm, ts, cfg.h_frac);
        if (warnings && ork.zero_residual_points > 0)
            warnings->push_back(std::string(to_string(kind)) + ": " +
                                std::to_string(ork.zero_residual_points) +
                                " points with no finite residual");
        kernels.push_back(sparsify(ork.kernel, cfg.eps_quantile));
    }
    return kernels;
}

PipelineResult run_pipeline(const PipelineConfig& cfg, const TrackSet& input) {
    validate_config(cfg);
    const TrackSet ts = drop_flagged(input);
    validate_trackset(ts);

    PipelineResult result;
    result.kernels = build_kernels(cfg, ts, &result.warnings);
    const Rng root(cfg.seed);
    const std::uint64_t cluster_seed = root.derive(20).next_u64();

    if (cfg.num_motions == 0) {
        SelectionParams sp;
        sp.delta = cfg.delta;
        sp.m_min = cfg.m_min;
        sp.m_max = std::min(cfg.m_max, ts.num_points());
        sp.scheme = cfg.fusion;
        sp.lambda = cfg.lambda;
        sp.gamma = cfg.gamma;
        sp.max_iters = cfg.max_iters;
        sp.tol = cfg.tol;
        sp.restarts = cfg.restarts;
        sp.seed = cluster_seed;
        SelectionResult sel = select_model(result.kernels, sp);
        result.assignment = sel.best().assignment;
        result.selection = std::move(sel);
    } else {
        const int m = cfg.num_motions;
        FusionParams fp{cfg.max_iters, cfg.tol, cfg.restarts, cluster_seed};
        switch (cfg.fusion) {
            case FusionScheme::Single: {
                const SpectralEmbedding emb = embed(laplacian(result.kernels.front()), m);
                result.assignment = cluster_kmeans(emb.U, m, cfg.restarts, cluster_seed);
                break;
            }
            case FusionScheme::KernelAddition:
                result.assignment =
                    fuse_kernel_addition(result.kernels, m, cfg.restarts, cluster_seed);
                break;
            case FusionScheme::CoReg:
                result.assignment = fuse_coreg(result.kernels, m, cfg.lambda, fp).assignment;
                break;
            case FusionScheme::Subset:
                result.assignment = fuse_subset(result.kernels, m, cfg.gamma, fp).assignment;
                break;
        }
    }

    if (ts.labels) result.error = classification_error(result.assignment, *ts.labels);
    return result;
}

std::string file_hash_hex(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError(path + ": cannot open for hashing");
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    char buf[4096];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            hash ^= static_cast<unsigned char>(buf[i]);
            hash *= 0x100000001b3ULL;
        }
        if (!in) break;
    }
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(hash));
    return hex;
}

std::string config_json(const PipelineConfig& cfg) {
    nlohmann::json j;
    std::string models;
    for (const auto& m : cfg.models) {
        if (!models.empty()) models += ',';
        models += std::string(1, to_string(m)[0]);
    }
    j["models"] = models;
    j["fusion"] = to_string(cfg.fusion);
    j["num_motions"] = cfg.num_motions == 0 ? nlohmann::json("auto") : nlohmann::json(cfg.num_motions);
    j["per_pair"] = cfg.per_pair;
    j["h_frac"] = cfg.h_frac;
    j["eps_quantile"] = cfg.eps_quantile;
    j["lambda"] = cfg.lambda;
    j["gamma"] = cfg.gamma;
    j["delta"] = cfg.delta;
    j["m_min"] = cfg.m_min;
    j["m_max"] = cfg.m_max;
    j["restarts"] = cfg.restarts;
    j["max_iters"] = cfg.max_iters;
    j["tol"] = cfg.tol;
    j["seed"] = cfg.seed;
    return j.dump(2);
}

}  // namespace moseg
