#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace moseg {

/// N feature trajectories over F frames with per-frame visibility, optional
/// ground-truth motion labels (0 = background by convention) and optional
/// outlier flags. Coordinates at invisible frames are stored as (0, 0).
struct TrackSet {
    Eigen::MatrixXd x;  // N x F
    Eigen::MatrixXd y;  // N x F
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> visible;  // N x F
    std::optional<std::vector<int>> labels;                      // length N
    std::optional<std::vector<std::uint8_t>> outlier_flags;      // length N

    int num_points() const { return static_cast<int>(x.rows()); }
    int num_frames() const { return static_cast<int>(x.cols()); }
};

/// Throws InputError if the invariants do not hold (finite coordinates where
/// visible, every track visible in >= 2 frames, N >= 1, F >= 2, field sizes).
void validate_trackset(const TrackSet& ts);

enum class TrackFormat { Tsv, Json };

struct LoadResult {
    TrackSet tracks;
    int dropped_short_tracks = 0;  // tracks visible in < 2 frames
};

/// Parse a trajectory file. Malformed content is reported with its line
/// number (TSV) or JSON path. Tracks visible in < 2 frames are dropped and
/// counted in the result.
LoadResult load_trackset(const std::string& path, TrackFormat format);

/// Inverse of load_trackset. TSV coordinates carry up to 9 significant
/// digits; JSON round-trips exactly.
void save_trackset(const TrackSet& ts, const std::string& path, TrackFormat format);

/// Keeps every foreground point (label != 0) and ceil(fraction * N_bg)
/// background points chosen uniformly without replacement. Original point
/// order is preserved. Requires labels.
TrackSet subsample_background(const TrackSet& ts, double fraction, std::uint64_t seed);

struct OutlierParams {
    int ransac_iters = 500;
    double inlier_tol = 1.0;  // pixels; a point is an inlier when sampson <= tol^2
    std::uint64_t seed = 0;
};

struct GroupOutlierStats {
    int label = 0;
    std::vector<int> point_indices;  // group members, ascending
    std::vector<double> scores;      // frame-normalized accumulated Sampson error
    double threshold = 0.0;          // Q3 + 7*IQR of the group's scores
    bool fitted = false;             // at least one frame pair was fittable
};

struct OutlierResult {
    TrackSet tracks;  // input with outlier_flags set
    std::vector<GroupOutlierStats> groups;
    std::vector<std::string> warnings;
    int num_flagged = 0;
};

/// Per labeled motion group and consecutive frame pair, fits one fundamental
/// matrix by RANSAC (8-point samples, Sampson inlier count, best model refit
/// on its inliers by DLT). A trajectory's score is the sum of Sampson errors
/// to those per-pair models over its visible span divided by the number of
/// frames it appears in; within each group, scores above Q3 + 7*IQR are
/// flagged. All scores equal (IQR = 0) flags nothing.
OutlierResult remove_outliers(const TrackSet& ts, const OutlierParams& params = {});

}  // namespace moseg
