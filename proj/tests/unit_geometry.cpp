#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "moseg/errors.hpp"
#include "moseg/geometry.hpp"
#include "moseg/rng.hpp"
#include "oracles.hpp"

using namespace moseg;

namespace {

Eigen::Vector2d apply_h(const Eigen::Matrix3d& h, const Eigen::Vector2d& p) {
    const Eigen::Vector3d q = h * Eigen::Vector3d(p.x(), p.y(), 1.0);
    return {q.x() / q.z(), q.y() / q.z()};
}

double gauge_distance(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b) {
    const Eigen::Matrix3d an = a / a.norm();
    const Eigen::Matrix3d bn = b / b.norm();
    return std::min((an - bn).cwiseAbs().maxCoeff(), (an + bn).cwiseAbs().maxCoeff());
}

/// Random well-conditioned homography: rotation-ish core plus bounded
/// perspective terms.
Eigen::Matrix3d random_homography(Rng& rng) {
    Eigen::Matrix3d h;
    for (;;) {
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) h(r, c) = rng.normal();
        h(2, 0) *= 0.1;
        h(2, 1) *= 0.1;
        h(2, 2) = 2.0 + rng.uniform_double();
        Eigen::JacobiSVD<Eigen::Matrix3d> svd(h);
        if (svd.singularValues()(2) > 0.15 * svd.singularValues()(0)) return h;
    }
}

struct CameraPair {
    Eigen::Matrix3d f_true;
    std::vector<Correspondence> corr;
};

/// Two pinhole cameras observing a random cloud; F = K^-T [t]x R K^-1.
CameraPair random_camera_pair(Rng& rng, int num_points) {
    const double focal = 500.0;
    Eigen::Matrix3d k;
    k << focal, 0, 320, 0, focal, 240, 0, 0, 1;
    const Eigen::Vector3d axis =
        Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal()).normalized();
    const Eigen::Matrix3d r = Eigen::AngleAxisd(0.1 + 0.2 * rng.uniform_double(), axis)
                                  .toRotationMatrix();
    const Eigen::Vector3d t =
        Eigen::Vector3d(rng.normal(), rng.normal(), 0.3 * rng.normal()).normalized() *
        (0.5 + rng.uniform_double());
    Eigen::Matrix3d tx;
    tx << 0, -t.z(), t.y(), t.z(), 0, -t.x(), -t.y(), t.x(), 0;
    CameraPair pair;
    pair.f_true = k.inverse().transpose() * tx * r * k.inverse();
    while (static_cast<int>(pair.corr.size()) < num_points) {
        const Eigen::Vector3d p(4.0 * rng.normal(), 4.0 * rng.normal(),
                                8.0 + 4.0 * rng.uniform_double());
        const Eigen::Vector3d q = r * p + t;
        if (q.z() < 0.5) continue;
        const Eigen::Vector3d x1 = k * p / p.z();
        const Eigen::Vector3d x2 = k * q / q.z();
        pair.corr.push_back({{x1.x(), x1.y()}, {x2.x(), x2.y()}});
    }
    return pair;
}

}  // namespace

TEST_CASE("minimal sample sizes") {
    CHECK(minimal_sample_size(ModelKind::Affine) == 3);
    CHECK(minimal_sample_size(ModelKind::Homography) == 4);
    CHECK(minimal_sample_size(ModelKind::Fundamental) == 8);
}

TEST_CASE("identity homography from four fixed points") {
    std::vector<Correspondence> corr = {{{0, 0}, {0, 0}},
                                        {{10, 0}, {10, 0}},
                                        {{0, 10}, {0, 10}},
                                        {{7, 13}, {7, 13}}};
    const Hypothesis h = fit_model(ModelKind::Homography, corr, 0, 1);
    const Eigen::Matrix3d expected = Eigen::Matrix3d::Identity() / std::sqrt(3.0);
    CHECK((h.m - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("homography construct-then-recover") {
    Rng rng(42);
    for (int trial = 0; trial < 100; ++trial) {
        const Eigen::Matrix3d h_true = random_homography(rng);
        std::vector<Correspondence> corr;
        for (int i = 0; i < 12; ++i) {
            const Eigen::Vector2d p(rng.uniform_double(-50, 50), rng.uniform_double(-50, 50));
            corr.push_back({p, apply_h(h_true, p)});
        }
        const Hypothesis h = fit_model(ModelKind::Homography, corr, 0, 1);
        CHECK(gauge_distance(h.m, h_true) < 1e-8);
    }
}

TEST_CASE("affine construct-then-recover and third-row structure") {
    Rng rng(43);
    for (int trial = 0; trial < 100; ++trial) {
        Eigen::Matrix3d a_true = Eigen::Matrix3d::Identity();
        a_true(0, 0) = 1.0 + 0.3 * rng.normal();
        a_true(0, 1) = 0.3 * rng.normal();
        a_true(1, 0) = 0.3 * rng.normal();
        a_true(1, 1) = 1.0 + 0.3 * rng.normal();
        a_true(0, 2) = 20.0 * rng.normal();
        a_true(1, 2) = 20.0 * rng.normal();
        std::vector<Correspondence> corr;
        for (int i = 0; i < 8; ++i) {
            const Eigen::Vector2d p(rng.uniform_double(-40, 40), rng.uniform_double(-40, 40));
            corr.push_back({p, apply_h(a_true, p)});
        }
        const Hypothesis a = fit_model(ModelKind::Affine, corr, 0, 1);
        CHECK(gauge_distance(a.m, a_true) < 1e-8);
        CHECK(a.m(2, 0) == 0.0);
        CHECK(a.m(2, 1) == 0.0);
    }
}

TEST_CASE("fundamental construct-then-recover and epipolar constraint") {
    Rng rng(44);
    for (int trial = 0; trial < 100; ++trial) {
        const CameraPair pair = random_camera_pair(rng, 24);
        const Hypothesis f = fit_model(ModelKind::Fundamental, pair.corr, 0, 1);
        CHECK(gauge_distance(f.m, pair.f_true) < 1e-8);
        // Rank-2: smallest singular value vanishes.
        Eigen::JacobiSVD<Eigen::Matrix3d> svd(f.m);
        CHECK(svd.singularValues()(2) < 1e-8);
    }
}

TEST_CASE("fundamental from 8 correspondences satisfies epipolar constraint on them") {
    Rng rng(45);
    const CameraPair pair = random_camera_pair(rng, 8);
    const Hypothesis f = fit_model(ModelKind::Fundamental, pair.corr, 0, 1);
    for (const auto& c : pair.corr) {
        const Eigen::Vector3d x1(c.first.x(), c.first.y(), 1.0);
        const Eigen::Vector3d x2(c.second.x(), c.second.y(), 1.0);
        CHECK(std::abs(x2.dot(f.m * x1)) < 1e-9);
    }
}

TEST_CASE("sampson error is zero on exact correspondences, all kinds") {
    Rng rng(46);
    SUBCASE("homography") {
        const Eigen::Matrix3d h_true = random_homography(rng);
        Hypothesis h{ModelKind::Homography, 0, 1, h_true / h_true.norm()};
        for (int i = 0; i < 20; ++i) {
            const Eigen::Vector2d p(rng.uniform_double(-30, 30), rng.uniform_double(-30, 30));
            CHECK(sampson_error(h, p, apply_h(h_true, p)) < 1e-12);
        }
    }
    SUBCASE("fundamental") {
        const CameraPair pair = random_camera_pair(rng, 20);
        Hypothesis f{ModelKind::Fundamental, 0, 1, pair.f_true / pair.f_true.norm()};
        for (const auto& c : pair.corr) CHECK(sampson_error(f, c.first, c.second) < 1e-12);
    }
    SUBCASE("affine") {
        Eigen::Matrix3d a_true;
        a_true << 1.1, 0.2, 5.0, -0.1, 0.9, -3.0, 0, 0, 1;
        Hypothesis a{ModelKind::Affine, 0, 1, a_true / a_true.norm()};
        for (int i = 0; i < 20; ++i) {
            const Eigen::Vector2d p(rng.uniform_double(-30, 30), rng.uniform_double(-30, 30));
            CHECK(sampson_error(a, p, apply_h(a_true, p)) < 1e-12);
        }
    }
}

TEST_CASE("fundamental sampson matches a direct hand evaluation on fixed inputs") {
    // Fixed matrix and points; the oracle evaluates the textbook formula with
    // plain scalar arithmetic.
    const double f_entries[3][3] = {{1e-6, -3e-5, 0.01}, {2e-5, 4e-6, -0.02}, {-0.012, 0.025, 1.0}};
    Eigen::Matrix3d fm;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) fm(r, c) = f_entries[r][c];
    Hypothesis h{ModelKind::Fundamental, 0, 1, fm};
    const double x1 = 12.5, y1 = -33.25, x2 = 14.75, y2 = -30.0;
    const double expected = oracle::sampson_fundamental(f_entries, x1, y1, x2, y2);
    CHECK(sampson_error(h, {x1, y1}, {x2, y2}) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("sampson error is invariant to the matrix gauge") {
    Rng rng(47);
    const CameraPair pair = random_camera_pair(rng, 4);
    Hypothesis f{ModelKind::Fundamental, 0, 1, pair.f_true};
    Hypothesis f_neg = f;
    f_neg.m = -f.m;
    const Eigen::Vector2d p1(101.5, 220.25), p2(130.0, 210.5);
    CHECK(sampson_error(f, p1, p2) == doctest::Approx(sampson_error(f_neg, p1, p2)).epsilon(1e-12));
    for (double c : {0.3, -2.5, 1e4}) {
        Hypothesis fc = f;
        fc.m = c * f.m;
        CHECK(sampson_error(fc, p1, p2) ==
              doctest::Approx(sampson_error(f, p1, p2)).epsilon(1e-9));
    }
    Hypothesis hh{ModelKind::Homography, 0, 1, random_homography(rng)};
    Hypothesis hh2 = hh;
    hh2.m = -3.7 * hh.m;
    CHECK(sampson_error(hh, p1, p2) == doctest::Approx(sampson_error(hh2, p1, p2)).epsilon(1e-9));
}

TEST_CASE("degenerate samples are rejected") {
    SUBCASE("three collinear points among four for a homography") {
        std::vector<Correspondence> corr = {{{0, 0}, {1, 1}},
                                            {{1, 0}, {2, 1}},
                                            {{2, 0}, {3, 1}},
                                            {{5, 7}, {6, 8}}};
        CHECK_THROWS_AS(fit_model(ModelKind::Homography, corr, 0, 1), DegenerateSampleError);
    }
    SUBCASE("collinear affine sample") {
        std::vector<Correspondence> corr = {{{0, 0}, {0, 0}}, {{1, 1}, {1, 1}}, {{2, 2}, {2, 2}}};
        CHECK_THROWS_AS(fit_model(ModelKind::Affine, corr, 0, 1), DegenerateSampleError);
    }
    SUBCASE("duplicated points in a fundamental sample") {
        Rng rng(48);
        const CameraPair pair = random_camera_pair(rng, 4);
        std::vector<Correspondence> corr = pair.corr;
        corr.insert(corr.end(), pair.corr.begin(), pair.corr.end());  // 8 points, 4 distinct
        CHECK_THROWS_AS(fit_model(ModelKind::Fundamental, corr, 0, 1), DegenerateSampleError);
    }
    SUBCASE("coincident points") {
        std::vector<Correspondence> corr(4, {{1, 1}, {2, 2}});
        CHECK_THROWS_AS(fit_model(ModelKind::Homography, corr, 0, 1), DegenerateSampleError);
    }
}

TEST_CASE("fit on noise-free minimal samples gives zero sampson on those samples") {
    Rng rng(49);
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::Matrix3d h_true = random_homography(rng);
        std::vector<Correspondence> hc;
        for (int i = 0; i < 4; ++i) {
            const Eigen::Vector2d p(rng.uniform_double(-40, 40), rng.uniform_double(-40, 40));
            hc.push_back({p, apply_h(h_true, p)});
        }
        try {
            const Hypothesis h = fit_model(ModelKind::Homography, hc, 0, 1);
            for (const auto& c : hc) CHECK(sampson_error(h, c.first, c.second) < 1e-10);
        } catch (const DegenerateSampleError&) {
        }

        const CameraPair pair = random_camera_pair(rng, 8);
        const Hypothesis f = fit_model(ModelKind::Fundamental, pair.corr, 0, 1);
        for (const auto& c : pair.corr) CHECK(sampson_error(f, c.first, c.second) < 1e-10);

        Eigen::Matrix3d a_true = Eigen::Matrix3d::Identity();
        a_true(0, 2) = 3.0;
        a_true(1, 0) = 0.25;
        std::vector<Correspondence> ac;
        for (int i = 0; i < 3; ++i) {
            const Eigen::Vector2d p(rng.uniform_double(-40, 40), rng.uniform_double(-40, 40));
            ac.push_back({p, apply_h(a_true, p)});
        }
        try {
            const Hypothesis a = fit_model(ModelKind::Affine, ac, 0, 1);
            for (const auto& c : ac) CHECK(sampson_error(a, c.first, c.second) < 1e-10);
        } catch (const DegenerateSampleError&) {
        }
    }
}

TEST_CASE("hartley-normalized DLT is similarity-equivariant") {
    Rng rng(50);
    const CameraPair pair = random_camera_pair(rng, 16);
    const Hypothesis f_orig = fit_model(ModelKind::Fundamental, pair.corr, 0, 1);

    const double scale = 3.25;
    const Eigen::Vector2d shift(250.0, -80.0);
    std::vector<Correspondence> moved;
    for (const auto& c : pair.corr)
        moved.push_back({scale * c.first + shift, scale * c.second + shift});
    const Hypothesis f_moved = fit_model(ModelKind::Fundamental, moved, 0, 1);

    for (size_t i = 0; i < pair.corr.size(); ++i) {
        const double e_orig = sampson_error(f_orig, pair.corr[i].first, pair.corr[i].second);
        const double e_moved = sampson_error(f_moved, moved[i].first, moved[i].second);
        // Sampson error scales with squared pixel units.
        CHECK(std::abs(e_moved / (scale * scale) - e_orig) < 1e-8);
    }
}

TEST_CASE("fit_model rejects too-small or non-finite input") {
    std::vector<Correspondence> corr = {{{0, 0}, {0, 0}}, {{1, 0}, {1, 0}}, {{0, 1}, {0, 1}}};
    CHECK_THROWS_AS(fit_model(ModelKind::Homography, corr, 0, 1), InputError);
    corr.push_back({{std::nan(""), 0}, {1, 1}});
    CHECK_THROWS_AS(fit_model(ModelKind::Homography, corr, 0, 1), InputError);
}
