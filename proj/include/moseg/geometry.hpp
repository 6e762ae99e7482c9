#pragma once

#include <Eigen/Core>
#include <span>
#include <utility>

namespace moseg {

enum class ModelKind { Affine, Homography, Fundamental };

/// Minimal sample size p: 3 for affine, 4 for homography, 8 for fundamental.
int minimal_sample_size(ModelKind kind);

const char* to_string(ModelKind kind);

/// One fitted geometric model on a frame pair. The matrix is normalized to
/// unit Frobenius norm with its largest-magnitude entry positive, so equal
/// models compare bit-equal. An affine matrix keeps third row (0, 0, s).
/// A fundamental matrix has rank 2 enforced.
struct Hypothesis {
    ModelKind kind;
    int frame1 = 0;  // 0-based, frame1 < frame2
    int frame2 = 0;
    Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
};

/// A correspondence (point in frame1, point in frame2).
using Correspondence = std::pair<Eigen::Vector2d, Eigen::Vector2d>;

/// DLT fit with Hartley normalization (translate to centroid, scale mean
/// distance to sqrt(2), denormalize after the solve).
/// Homography/fundamental: least-squares null vector of the design matrix by
/// SVD; fundamental additionally gets its smallest singular value zeroed.
/// Affine: linear least squares for the 6 parameters.
/// Throws DegenerateSampleError when the design is rank deficient beyond the
/// model's gauge (e.g. collinear points).
Hypothesis fit_model(ModelKind kind, std::span<const Correspondence> corr,
                     int frame1, int frame2);

/// First-order Sampson error in px^2. Fundamental:
///   (x2' F x1)^2 / ((Fx1)_1^2 + (Fx1)_2^2 + (F'x2)_1^2 + (F'x2)_2^2).
/// Homography/affine: eps' (J J')^-1 eps with eps the 2-vector algebraic
/// residual of x2 ~ H x1 and J its Jacobian in the four point coordinates.
/// Returns +inf when the denominator degenerates (treated as worst residual).
double sampson_error(const Hypothesis& h, const Eigen::Vector2d& x1,
                     const Eigen::Vector2d& x2);

}  // namespace moseg
