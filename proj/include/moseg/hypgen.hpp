#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "moseg/geometry.hpp"
#include "moseg/trackset.hpp"

namespace moseg {

/// Residuals of every point to every hypothesis of one model kind.
/// values(i, k) is the Sampson error of point i under hypothesis k, or +inf
/// when point i is invisible in either frame of k's pair (or the Sampson
/// denominator degenerates).
struct ResidualMatrix {
    ModelKind kind = ModelKind::Homography;
    Eigen::MatrixXd values;               // N x K
    std::vector<Hypothesis> hypotheses;   // column k -> hypothesis (may be
                                          // empty for cached matrices)
};

struct HypothesisSet {
    std::vector<Hypothesis> hypotheses;
    std::vector<std::string> warnings;
    int skipped_pairs = 0;   // frame pairs with too few co-visible points
    int failed_slots = 0;    // slots abandoned after repeated degenerate draws
};

/// For each consecutive frame pair (f, f+1) draws `per_pair` minimal samples
/// uniformly among points visible in both frames and fits them with
/// fit_model. Degenerate samples are re-drawn up to 100 times per slot, then
/// the slot is dropped, so K <= per_pair * (F-1). Each slot uses its own
/// derived RNG stream; results are identical regardless of evaluation order.
/// Throws NumericalError when no frame pair yields any hypothesis.
HypothesisSet generate_hypotheses(const TrackSet& ts, ModelKind kind, int per_pair,
                                  std::uint64_t seed);

/// Sampson error of every point under every hypothesis (all one kind).
ResidualMatrix compute_residuals(const TrackSet& ts, const std::vector<Hypothesis>& hyps);

/// Binary cache: u32 kind, u64 N, u64 K, then N*K row-major little-endian
/// doubles (+inf stored as IEEE infinity). Hypotheses are not cached.
void write_residuals(const ResidualMatrix& rm, const std::string& path);
ResidualMatrix read_residuals(const std::string& path);

}  // namespace moseg
