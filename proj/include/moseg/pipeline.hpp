#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "moseg/eval.hpp"
#include "moseg/modelsel.hpp"
#include "moseg/spectral.hpp"
#include "moseg/trackset.hpp"

namespace moseg {

struct PipelineConfig {
    std::vector<ModelKind> models = {ModelKind::Affine, ModelKind::Homography,
                                     ModelKind::Fundamental};
    FusionScheme fusion = FusionScheme::Subset;
    int num_motions = 0;  // 0 = auto (model selection)
    int per_pair = 500;
    double h_frac = 0.1;
    double eps_quantile = 0.9;
    double lambda = 1e-2;
    double gamma = 1e-2;
    double delta = 0.1;
    int m_min = 1;
    int m_max = 10;
    int restarts = 20;
    int max_iters = 50;
    double tol = 1e-6;
    std::uint64_t seed = 0;
};

/// Throws InputError when the combination is inconsistent (subset fusion
/// needs exactly affine+homography+fundamental in that order, single fusion
/// exactly one model).
void validate_config(const PipelineConfig& cfg);

struct PipelineResult {
    Assignment assignment;
    std::vector<AffinityKernel> kernels;  // one per configured model
    std::optional<SelectionResult> selection;
    std::optional<double> error;  // classification error when labels present
    std::vector<std::string> warnings;
};

/// hypgen -> residuals -> ORK kernel per model -> chosen fusion
/// (-> model selection when num_motions = 0) -> evaluation when labels are
/// present. Outlier-flagged points are excluded up front. Deterministic
/// given cfg.seed.
PipelineResult run_pipeline(const PipelineConfig& cfg, const TrackSet& input);

/// Build the per-model ORK kernels only (shared by run_pipeline and the CLI
/// kernel/select subcommands).
std::vector<AffinityKernel> build_kernels(const PipelineConfig& cfg, const TrackSet& ts,
                                          std::vector<std::string>* warnings = nullptr);

/// FNV-1a 64-bit hash of a file's bytes, as hex (run.json input fingerprint).
std::string file_hash_hex(const std::string& path);

std::string config_json(const PipelineConfig& cfg);

}  // namespace moseg
