#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <set>

#include "moseg/errors.hpp"
#include "moseg/ork.hpp"
#include "moseg/rng.hpp"
#include "oracles.hpp"

using namespace moseg;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

TrackSet fully_visible(int n, int f) {
    TrackSet ts;
    ts.x.setConstant(n, f, 1.0);
    ts.y.setConstant(n, f, 2.0);
    ts.visible.setConstant(n, f, true);
    return ts;
}

ResidualMatrix residuals_of(Eigen::MatrixXd values) {
    ResidualMatrix rm;
    rm.kind = ModelKind::Homography;
    rm.values = std::move(values);
    return rm;
}

}  // namespace

TEST_CASE("identical residual vectors, fully co-visible: k = h / F") {
    const int f = 8, k = 40;
    const TrackSet ts = fully_visible(2, f);
    Eigen::MatrixXd values(2, k);
    Rng rng(3);
    for (int c = 0; c < k; ++c) values(0, c) = values(1, c) = rng.uniform_double(0.1, 9.0);
    const OrkResult res = build_ork_kernel(residuals_of(values), ts, 0.25);
    const int h = static_cast<int>(std::ceil(0.25 * k));
    CHECK(res.kernel.K(0, 1) == doctest::Approx(static_cast<double>(h) / f).epsilon(1e-12));
    CHECK(res.kernel.K(0, 0) == 0.0);
}

TEST_CASE("disjoint top-h sets give zero affinity") {
    const TrackSet ts = fully_visible(2, 4);
    Eigen::MatrixXd values(2, 10);
    for (int c = 0; c < 10; ++c) {
        values(0, c) = c < 5 ? 0.1 + c * 0.01 : 100.0 + c;
        values(1, c) = c < 5 ? 100.0 + c : 0.1 + c * 0.01;
    }
    const OrkResult res = build_ork_kernel(residuals_of(values), ts, 0.5);
    CHECK(res.kernel.K(0, 1) == 0.0);
}

TEST_CASE("hand residual table matches brute-force set intersections") {
    const int f = 5;
    const TrackSet ts = fully_visible(3, f);
    Eigen::MatrixXd values(3, 5);
    values << 0.9, 0.1, 0.5, 0.7, 0.3,
              0.2, 0.8, 0.4, 0.6, 0.1,
              0.5, 0.3, 0.9, 0.2, 0.7;
    const double h_frac = 0.4;  // h = 2 of 5
    const OrkResult res = build_ork_kernel(residuals_of(values), ts, h_frac);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            if (i == j) continue;
            // Oracle: exhaustive set intersection of the 2 smallest indices.
            auto top2 = [&](int row) {
                std::vector<std::pair<double, int>> order;
                for (int c = 0; c < 5; ++c) order.push_back({values(row, c), c});
                std::sort(order.begin(), order.end());
                return std::set<int>{order[0].second, order[1].second};
            };
            const std::set<int> a = top2(i), b = top2(j);
            int common = 0;
            for (int idx : a) common += b.count(idx);
            CHECK(res.kernel.K(i, j) ==
                  doctest::Approx(static_cast<double>(common) / f).epsilon(1e-12));
        }
}

TEST_CASE("co-visibility normalization and never co-visible pairs") {
    TrackSet ts = fully_visible(2, 6);
    // Points co-visible in exactly 2 frames.
    ts.visible(0, 0) = ts.visible(0, 1) = ts.visible(0, 2) = true;
    ts.visible(0, 3) = ts.visible(0, 4) = ts.visible(0, 5) = false;
    ts.visible(1, 0) = false;
    Eigen::MatrixXd values(2, 6);
    for (int c = 0; c < 6; ++c) {
        values(0, c) = 0.1 + 0.1 * c;
        values(1, c) = 0.1 + 0.1 * c;
    }
    const OrkResult res = build_ork_kernel(residuals_of(values), ts, 0.5);
    // h = 3, identical orders, covis = frames 1,2 -> 2.
    CHECK(res.kernel.K(0, 1) == doctest::Approx(3.0 / 2.0));

    TrackSet disjoint = fully_visible(2, 6);
    for (int f = 0; f < 6; ++f) {
        disjoint.visible(0, f) = f < 3;
        disjoint.visible(1, f) = f >= 3;
    }
    const OrkResult res2 = build_ork_kernel(residuals_of(values), disjoint, 0.5);
    CHECK(res2.kernel.K(0, 1) == 0.0);
}

TEST_CASE("point with no finite residual gets a zero row and a warning count") {
    const TrackSet ts = fully_visible(3, 4);
    Eigen::MatrixXd values(3, 6);
    values.setConstant(0.5);
    values.row(1).setConstant(kInf);
    const OrkResult res = build_ork_kernel(residuals_of(values), ts, 0.5);
    CHECK(res.zero_residual_points == 1);
    CHECK(res.kernel.K.row(1).cwiseAbs().maxCoeff() == 0.0);
    CHECK(res.kernel.K.col(1).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("permutation equivariance") {
    Rng rng(19);
    const int n = 12, k = 30, f = 5;
    TrackSet ts = fully_visible(n, f);
    Eigen::MatrixXd values(n, k);
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < k; ++c) values(i, c) = rng.uniform_double(0.0, 5.0);
    const OrkResult base = build_ork_kernel(residuals_of(values), ts, 0.2);

    std::vector<int> perm(n);
    for (int i = 0; i < n; ++i) perm[i] = (i * 5 + 3) % n;  // a fixed permutation
    Eigen::MatrixXd pv(n, k);
    for (int i = 0; i < n; ++i) pv.row(i) = values.row(perm[i]);
    const OrkResult permuted = build_ork_kernel(residuals_of(pv), ts, 0.2);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            CHECK(permuted.kernel.K(i, j) == base.kernel.K(perm[i], perm[j]));
}

TEST_CASE("raw co-occurrence is monotone in h and bounded") {
    Rng rng(20);
    const int n = 10, k = 50, f = 6;
    const TrackSet ts = fully_visible(n, f);
    Eigen::MatrixXd values(n, k);
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < k; ++c) values(i, c) = rng.uniform_double(0.0, 5.0);
    const ResidualMatrix rm = residuals_of(values);
    const OrkResult small = build_ork_kernel(rm, ts, 0.1);
    const OrkResult large = build_ork_kernel(rm, ts, 0.3);
    const int h_small = 5, h_large = 15;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            // Fully visible: raw count = k_ij * F.
            const double raw_small = small.kernel.K(i, j) * f;
            const double raw_large = large.kernel.K(i, j) * f;
            CHECK(raw_large >= raw_small - 1e-12);
            CHECK(raw_small <= h_small + 1e-12);
            CHECK(raw_large <= h_large + 1e-12);
        }
}

TEST_CASE("kernel is symmetric with zero diagonal, exactly") {
    Rng rng(21);
    const int n = 15, k = 40;
    const TrackSet ts = fully_visible(n, 4);
    Eigen::MatrixXd values(n, k);
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < k; ++c) values(i, c) = rng.uniform_double(0.0, 2.0);
    const OrkResult res = build_ork_kernel(residuals_of(values), ts, 0.25);
    CHECK((res.kernel.K - res.kernel.K.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(res.kernel.K.diagonal().cwiseAbs().maxCoeff() == 0.0);
    CHECK(res.kernel.K.minCoeff() >= 0.0);
}

TEST_CASE("sparsify") {
    AffinityKernel kern;
    kern.K.setZero(5, 5);
    // Ten distinct positive entries in the upper triangle.
    double v = 1.0;
    for (int i = 0; i < 5; ++i)
        for (int j = i + 1; j < 5; ++j) {
            kern.K(i, j) = v;
            kern.K(j, i) = v;
            v += 1.0;
        }
    kern.degree = kern.K.rowwise().sum();

    SUBCASE("quantile zero is the identity") {
        const AffinityKernel out = sparsify(kern, 0.0);
        CHECK((out.K - kern.K).cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("median quantile zeroes exactly the five smallest") {
        const AffinityKernel out = sparsify(kern, 0.5);
        int zeroed = 0, kept = 0;
        for (int i = 0; i < 5; ++i)
            for (int j = i + 1; j < 5; ++j) {
                if (out.K(i, j) == 0.0) {
                    ++zeroed;
                    CHECK(kern.K(i, j) <= 5.0);
                } else {
                    ++kept;
                    CHECK(kern.K(i, j) >= 6.0);
                }
            }
        CHECK(zeroed == 5);
        CHECK(kept == 5);
    }
    SUBCASE("symmetry and nonnegativity preserved, degrees recomputed") {
        const AffinityKernel out = sparsify(kern, 0.7);
        CHECK((out.K - out.K.transpose()).cwiseAbs().maxCoeff() == 0.0);
        CHECK(out.K.minCoeff() >= 0.0);
        CHECK((out.degree - out.K.rowwise().sum()).cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("all-zero kernel unchanged") {
        AffinityKernel zero;
        zero.K.setZero(4, 4);
        zero.degree = zero.K.rowwise().sum();
        const AffinityKernel out = sparsify(zero, 0.5);
        CHECK(out.K.cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("invalid quantile rejected") {
        CHECK_THROWS_AS(sparsify(kern, 1.0), InputError);
        CHECK_THROWS_AS(sparsify(kern, -0.1), InputError);
    }
}

TEST_CASE("kernel export round-trips") {
    Rng rng(23);
    AffinityKernel kern = oracle::random_kernel(9, rng);
    kern.kind = ModelKind::Fundamental;
    const std::string path = (std::filesystem::temp_directory_path() / "kern.bin").string();
    write_kernel(kern, path);
    const AffinityKernel back = read_kernel(path);
    CHECK(back.kind == ModelKind::Fundamental);
    CHECK((back.K - kern.K).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("h_frac bounds are enforced") {
    const TrackSet ts = fully_visible(2, 3);
    Eigen::MatrixXd values(2, 4);
    values.setConstant(1.0);
    CHECK_THROWS_AS(build_ork_kernel(residuals_of(values), ts, 0.0), InputError);
    CHECK_THROWS_AS(build_ork_kernel(residuals_of(values), ts, 1.5), InputError);
    CHECK_NOTHROW(build_ork_kernel(residuals_of(values), ts, 1.0));
}
