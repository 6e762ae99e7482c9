#include "moseg/ork.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "moseg/errors.hpp"
#include "moseg/stats.hpp"

namespace moseg {

OrkResult build_ork_kernel(const ResidualMatrix& rm, const TrackSet& ts, double h_frac) {
    if (!(h_frac > 0.0 && h_frac <= 1.0))
        throw InputError("build_ork_kernel: h_frac must be in (0, 1]");
    const int n = ts.num_points();
    const int num_frames = ts.num_frames();
    if (rm.values.rows() != n)
        throw InputError("build_ork_kernel: residual matrix does not match the track set");
    const int k = static_cast<int>(rm.values.cols());

    OrkResult result;
    result.kernel.kind = rm.kind;
    result.kernel.K.setZero(n, n);

    // Top-h inlier sets with the per-point adaptive count h_i = ceil(h_frac * K_i).
    std::vector<std::vector<int>> inlier_sets(n);
    std::vector<std::pair<double, int>> order;
    for (int i = 0; i < n; ++i) {
        order.clear();
        for (int c = 0; c < k; ++c) {
            const double v = rm.values(i, c);
            if (std::isfinite(v)) order.emplace_back(v, c);
        }
        if (order.empty()) {
            ++result.zero_residual_points;
            continue;
        }
        const int h = static_cast<int>(
            std::ceil(h_frac * static_cast<double>(order.size()) - 1e-12));
        std::partial_sort(order.begin(), order.begin() + h, order.end());
        auto& set = inlier_sets[i];
        set.reserve(h);
        for (int t = 0; t < h; ++t) set.push_back(order[t].second);
        std::sort(set.begin(), set.end());
    }

    // Per-point visibility bitmasks for co-visibility counts.
    const int words = (num_frames + 63) / 64;
    std::vector<std::uint64_t> vis_bits(static_cast<size_t>(n) * words, 0);
    for (int i = 0; i < n; ++i)
        for (int f = 0; f < num_frames; ++f)
            if (ts.visible(i, f)) vis_bits[i * words + f / 64] |= 1ull << (f % 64);

    for (int i = 0; i < n; ++i) {
        if (inlier_sets[i].empty()) continue;
        for (int j = i + 1; j < n; ++j) {
            if (inlier_sets[j].empty()) continue;
            int covis = 0;
            for (int w = 0; w < words; ++w)
                covis += std::popcount(vis_bits[i * words + w] & vis_bits[j * words + w]);
            if (covis == 0) continue;
            // Sorted-merge intersection count.
            const auto& a = inlier_sets[i];
            const auto& b = inlier_sets[j];
            size_t ia = 0, ib = 0;
            int common = 0;
            while (ia < a.size() && ib < b.size()) {
                if (a[ia] < b[ib])
                    ++ia;
                else if (b[ib] < a[ia])
                    ++ib;
                else {
                    ++common;
                    ++ia;
                    ++ib;
                }
            }
            if (common == 0) continue;
            const double v = static_cast<double>(common) / covis;
            result.kernel.K(i, j) = v;
            result.kernel.K(j, i) = v;
        }
    }
    result.kernel.degree = result.kernel.K.rowwise().sum();
    return result;
}

AffinityKernel sparsify(const AffinityKernel& kern, double eps_quantile) {
    if (!(eps_quantile >= 0.0 && eps_quantile < 1.0))
        throw InputError("sparsify: eps_quantile must be in [0, 1)");
    const int n = kern.size();
    std::vector<double> positives;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (kern.K(i, j) > 0.0) positives.push_back(kern.K(i, j));
    if (positives.empty()) return kern;

    std::sort(positives.begin(), positives.end());
    const double threshold = quantile_sorted(positives, eps_quantile);

    AffinityKernel out;
    out.kind = kern.kind;
    out.K = kern.K;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (out.K(i, j) < threshold) {
                out.K(i, j) = 0.0;
                out.K(j, i) = 0.0;
            }
    out.degree = out.K.rowwise().sum();
    return out;
}

namespace {

void put_u32(std::ofstream& out, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ofstream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
}

}  // namespace

void write_kernel(const AffinityKernel& kern, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError(path + ": cannot open for writing");
    put_u32(out, static_cast<std::uint32_t>(kern.kind));
    put_u64(out, static_cast<std::uint64_t>(kern.K.rows()));
    for (Eigen::Index i = 0; i < kern.K.rows(); ++i)
        for (Eigen::Index j = 0; j < kern.K.cols(); ++j) {
            std::uint64_t bits;
            const double v = kern.K(i, j);
            std::memcpy(&bits, &v, 8);
            put_u64(out, bits);
        }
    if (!out) throw InputError(path + ": write failed");
}

AffinityKernel read_kernel(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError(path + ": cannot open for reading");
    unsigned char hb[4 + 8];
    in.read(reinterpret_cast<char*>(hb), sizeof(hb));
    if (!in) throw InputError(path + ": truncated header");
    std::uint32_t kind = 0;
    for (int i = 0; i < 4; ++i) kind |= static_cast<std::uint32_t>(hb[i]) << (8 * i);
    std::uint64_t n = 0;
    for (int i = 0; i < 8; ++i) n |= static_cast<std::uint64_t>(hb[4 + i]) << (8 * i);
    if (kind > 2 || n == 0 || n > (1u << 20)) throw InputError(path + ": bad header");
    AffinityKernel kern;
    kern.kind = static_cast<ModelKind>(kind);
    kern.K.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < kern.K.rows(); ++i)
        for (Eigen::Index j = 0; j < kern.K.cols(); ++j) {
            unsigned char b[8];
            in.read(reinterpret_cast<char*>(b), 8);
            std::uint64_t bits = 0;
            for (int t = 0; t < 8; ++t) bits |= static_cast<std::uint64_t>(b[t]) << (8 * t);
            double v;
            std::memcpy(&v, &bits, 8);
            kern.K(i, j) = v;
        }
    if (!in) throw InputError(path + ": truncated file");
    kern.degree = kern.K.rowwise().sum();
    return kern;
}

}  // namespace moseg
