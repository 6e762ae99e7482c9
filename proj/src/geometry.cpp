#include "moseg/geometry.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>
#include <limits>

#include "moseg/errors.hpp"

namespace moseg {

namespace {

constexpr double kRankTol = 1e-9;  // relative singular-value cutoff
constexpr double kInf = std::numeric_limits<double>::infinity();

/// Similarity transform taking the points to centroid 0 and mean distance
/// sqrt(2). Throws when all points coincide.
Eigen::Matrix3d hartley_transform(std::span<const Correspondence> corr, bool second) {
    const int n = static_cast<int>(corr.size());
    Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
    for (const auto& c : corr) centroid += second ? c.second : c.first;
    centroid /= n;
    double mean_dist = 0.0;
    for (const auto& c : corr) mean_dist += ((second ? c.second : c.first) - centroid).norm();
    mean_dist /= n;
    if (mean_dist < 1e-12)
        throw DegenerateSampleError("all sample points coincide");
    const double s = std::sqrt(2.0) / mean_dist;
    Eigen::Matrix3d t;
    t << s, 0, -s * centroid.x(), 0, s, -s * centroid.y(), 0, 0, 1;
    return t;
}

Eigen::Vector3d to_h(const Eigen::Vector2d& p) { return {p.x(), p.y(), 1.0}; }

/// Fixes scale and sign: unit Frobenius norm, largest-magnitude entry
/// positive (first in row-major order on ties).
Eigen::Matrix3d gauge_normalize(Eigen::Matrix3d m) {
    m /= m.norm();
    double best = 0.0;
    double sign = 1.0;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            if (std::abs(m(r, c)) > best) {
                best = std::abs(m(r, c));
                sign = m(r, c) < 0 ? -1.0 : 1.0;
            }
    return m * sign;
}

Eigen::Matrix3d fit_homography_normalized(std::span<const Correspondence> corr,
                                          const Eigen::Matrix3d& t1,
                                          const Eigen::Matrix3d& t2) {
    const int n = static_cast<int>(corr.size());
    Eigen::MatrixXd a(2 * n, 9);
    for (int i = 0; i < n; ++i) {
        const Eigen::Vector3d p = t1 * to_h(corr[i].first);
        const Eigen::Vector3d q = t2 * to_h(corr[i].second);
        a.row(2 * i) << 0, 0, 0, -p.x(), -p.y(), -1, q.y() * p.x(), q.y() * p.y(), q.y();
        a.row(2 * i + 1) << p.x(), p.y(), 1, 0, 0, 0, -q.x() * p.x(), -q.x() * p.y(), -q.x();
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    // Unique null space requires design rank 8.
    if (sv(7) < kRankTol * sv(0))
        throw DegenerateSampleError("homography sample is degenerate (rank-deficient design)");
    const Eigen::VectorXd h = svd.matrixV().col(8);
    Eigen::Matrix3d m;
    m << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
    return m;
}

Eigen::Matrix3d fit_fundamental_normalized(std::span<const Correspondence> corr,
                                           const Eigen::Matrix3d& t1,
                                           const Eigen::Matrix3d& t2) {
    const int n = static_cast<int>(corr.size());
    Eigen::MatrixXd a(n, 9);
    for (int i = 0; i < n; ++i) {
        const Eigen::Vector3d p = t1 * to_h(corr[i].first);
        const Eigen::Vector3d q = t2 * to_h(corr[i].second);
        a.row(i) << q.x() * p.x(), q.x() * p.y(), q.x(), q.y() * p.x(), q.y() * p.y(), q.y(),
            p.x(), p.y(), 1.0;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    if (sv(7) < kRankTol * sv(0))
        throw DegenerateSampleError("fundamental sample is degenerate (rank-deficient design)");
    const Eigen::VectorXd f = svd.matrixV().col(8);
    Eigen::Matrix3d m;
    m << f(0), f(1), f(2), f(3), f(4), f(5), f(6), f(7), f(8);
    // Rank-2 enforcement: zero the smallest singular value.
    Eigen::JacobiSVD<Eigen::Matrix3d> fsvd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Vector3d s = fsvd.singularValues();
    s(2) = 0.0;
    return fsvd.matrixU() * s.asDiagonal() * fsvd.matrixV().transpose();
}

Eigen::Matrix3d fit_affine_normalized(std::span<const Correspondence> corr,
                                      const Eigen::Matrix3d& t1, const Eigen::Matrix3d& t2) {
    const int n = static_cast<int>(corr.size());
    Eigen::MatrixXd design(n, 3);
    Eigen::VectorXd bx(n), by(n);
    for (int i = 0; i < n; ++i) {
        const Eigen::Vector3d p = t1 * to_h(corr[i].first);
        const Eigen::Vector3d q = t2 * to_h(corr[i].second);
        design.row(i) << p.x(), p.y(), 1.0;
        bx(i) = q.x();
        by(i) = q.y();
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(design, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    if (sv(2) < kRankTol * sv(0))
        throw DegenerateSampleError("affine sample is degenerate (collinear points)");
    const Eigen::Vector3d row1 = svd.solve(bx);
    const Eigen::Vector3d row2 = svd.solve(by);
    Eigen::Matrix3d m;
    m << row1(0), row1(1), row1(2), row2(0), row2(1), row2(2), 0, 0, 1;
    return m;
}

}  // namespace

int minimal_sample_size(ModelKind kind) {
    switch (kind) {
        case ModelKind::Affine: return 3;
        case ModelKind::Homography: return 4;
        case ModelKind::Fundamental: return 8;
    }
    return 0;
}

const char* to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::Affine: return "affine";
        case ModelKind::Homography: return "homography";
        case ModelKind::Fundamental: return "fundamental";
    }
    return "?";
}

Hypothesis fit_model(ModelKind kind, std::span<const Correspondence> corr, int frame1,
                     int frame2) {
    const int p = minimal_sample_size(kind);
    if (static_cast<int>(corr.size()) < p)
        throw InputError("fit_model: need at least " + std::to_string(p) + " correspondences");
    for (const auto& c : corr)
        if (!c.first.allFinite() || !c.second.allFinite())
            throw InputError("fit_model: non-finite point");

    const Eigen::Matrix3d t1 = hartley_transform(corr, false);
    const Eigen::Matrix3d t2 = hartley_transform(corr, true);

    Eigen::Matrix3d m;
    switch (kind) {
        case ModelKind::Affine:
            m = t2.inverse() * fit_affine_normalized(corr, t1, t2) * t1;
            break;
        case ModelKind::Homography:
            m = t2.inverse() * fit_homography_normalized(corr, t1, t2) * t1;
            break;
        case ModelKind::Fundamental:
            // x2' F x1 = (T2 x2)' Fhat (T1 x1)  =>  F = T2' Fhat T1.
            m = t2.transpose() * fit_fundamental_normalized(corr, t1, t2) * t1;
            break;
    }
    return Hypothesis{kind, frame1, frame2, gauge_normalize(m)};
}

double sampson_error(const Hypothesis& h, const Eigen::Vector2d& x1, const Eigen::Vector2d& x2) {
    const Eigen::Matrix3d& m = h.m;
    if (h.kind == ModelKind::Fundamental) {
        const Eigen::Vector3d fx1 = m * to_h(x1);
        const Eigen::Vector3d ftx2 = m.transpose() * to_h(x2);
        const double num = to_h(x2).dot(fx1);
        const double denom =
            fx1(0) * fx1(0) + fx1(1) * fx1(1) + ftx2(0) * ftx2(0) + ftx2(1) * ftx2(1);
        if (denom < 1e-300) return kInf;
        return num * num / denom;
    }
    // Homography / affine: first-order Sampson on the 2-vector algebraic
    // residual eps = (x2*w - h1.x1h, y2*w - h2.x1h), w = h3.x1h.
    const Eigen::Vector3d p = to_h(x1);
    const double w = m.row(2).dot(p);
    const double e1 = x2.x() * w - m.row(0).dot(p);
    const double e2 = x2.y() * w - m.row(1).dot(p);
    // J = d eps / d (x1, y1, x2, y2), 2 x 4.
    const double j11 = x2.x() * m(2, 0) - m(0, 0);
    const double j12 = x2.x() * m(2, 1) - m(0, 1);
    const double j21 = x2.y() * m(2, 0) - m(1, 0);
    const double j22 = x2.y() * m(2, 1) - m(1, 1);
    // S = J J' (2x2 symmetric).
    const double s11 = j11 * j11 + j12 * j12 + w * w;
    const double s12 = j11 * j21 + j12 * j22;
    const double s22 = j21 * j21 + j22 * j22 + w * w;
    const double det = s11 * s22 - s12 * s12;
    if (det < 1e-300) return kInf;
    return (s22 * e1 * e1 - 2.0 * s12 * e1 * e2 + s11 * e2 * e2) / det;
}

}  // namespace moseg
