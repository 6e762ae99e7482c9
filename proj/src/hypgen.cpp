#include "moseg/hypgen.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>

#include "moseg/errors.hpp"
#include "moseg/rng.hpp"

namespace moseg {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kMaxRedraws = 100;

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

void put_f64(std::ofstream& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(out, bits);
}

std::uint32_t get_u32(std::ifstream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

std::uint64_t get_u64(std::ifstream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

double get_f64(std::ifstream& in) {
    const std::uint64_t bits = get_u64(in);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

}  // namespace

HypothesisSet generate_hypotheses(const TrackSet& ts, ModelKind kind, int per_pair,
                                  std::uint64_t seed) {
    if (per_pair < 1) throw InputError("generate_hypotheses: per_pair must be >= 1");
    validate_trackset(ts);
    const int p = minimal_sample_size(kind);
    const int num_frames = ts.num_frames();
    const Rng root(seed);

    HypothesisSet out;
    for (int f = 0; f + 1 < num_frames; ++f) {
        std::vector<int> covis;
        for (int i = 0; i < ts.num_points(); ++i)
            if (ts.visible(i, f) && ts.visible(i, f + 1)) covis.push_back(i);
        if (static_cast<int>(covis.size()) < p) {
            out.warnings.push_back("frame pair (" + std::to_string(f + 1) + "," +
                                   std::to_string(f + 2) + "): only " +
                                   std::to_string(covis.size()) + " co-visible points, skipped");
            ++out.skipped_pairs;
            continue;
        }
        for (int slot = 0; slot < per_pair; ++slot) {
            Rng rng = root.derive(static_cast<std::uint64_t>(f),
                                  static_cast<std::uint64_t>(slot));
            bool placed = false;
            for (int attempt = 0; attempt < kMaxRedraws && !placed; ++attempt) {
                const std::vector<int> sample = rng.sample_without_replacement(covis, p);
                std::vector<Correspondence> corr;
                corr.reserve(p);
                for (int i : sample)
                    corr.push_back({{ts.x(i, f), ts.y(i, f)}, {ts.x(i, f + 1), ts.y(i, f + 1)}});
                try {
                    out.hypotheses.push_back(fit_model(kind, corr, f, f + 1));
                    placed = true;
                } catch (const DegenerateSampleError&) {
                }
            }
            if (!placed) ++out.failed_slots;
        }
    }
    if (out.hypotheses.empty())
        throw NumericalError("generate_hypotheses: no frame pair yielded any hypothesis");
    return out;
}

ResidualMatrix compute_residuals(const TrackSet& ts, const std::vector<Hypothesis>& hyps) {
    if (hyps.empty()) throw InputError("compute_residuals: no hypotheses");
    for (const auto& h : hyps)
        if (h.kind != hyps.front().kind)
            throw InputError("compute_residuals: hypotheses must share one model kind");
    const int n = ts.num_points();
    const int k = static_cast<int>(hyps.size());
    ResidualMatrix rm;
    rm.kind = hyps.front().kind;
    rm.hypotheses = hyps;
    rm.values.setConstant(n, k, kInf);
    for (int c = 0; c < k; ++c) {
        const Hypothesis& h = hyps[c];
        for (int i = 0; i < n; ++i) {
            if (!ts.visible(i, h.frame1) || !ts.visible(i, h.frame2)) continue;
            rm.values(i, c) = sampson_error(h, {ts.x(i, h.frame1), ts.y(i, h.frame1)},
                                            {ts.x(i, h.frame2), ts.y(i, h.frame2)});
        }
    }
    return rm;
}

void write_residuals(const ResidualMatrix& rm, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError(path + ": cannot open for writing");
    put_u32(out, static_cast<std::uint32_t>(rm.kind));
    put_u64(out, static_cast<std::uint64_t>(rm.values.rows()));
    put_u64(out, static_cast<std::uint64_t>(rm.values.cols()));
    for (Eigen::Index i = 0; i < rm.values.rows(); ++i)
        for (Eigen::Index j = 0; j < rm.values.cols(); ++j) put_f64(out, rm.values(i, j));
    if (!out) throw InputError(path + ": write failed");
}

ResidualMatrix read_residuals(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError(path + ": cannot open for reading");
    ResidualMatrix rm;
    const std::uint32_t kind = get_u32(in);
    if (kind > 2) throw InputError(path + ": bad model kind in header");
    rm.kind = static_cast<ModelKind>(kind);
    const std::uint64_t n = get_u64(in);
    const std::uint64_t k = get_u64(in);
    if (!in || n == 0 || k == 0 || n > (1u << 24) || k > (1u << 24))
        throw InputError(path + ": bad dimensions in header");
    rm.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
    for (Eigen::Index i = 0; i < rm.values.rows(); ++i)
        for (Eigen::Index j = 0; j < rm.values.cols(); ++j) rm.values(i, j) = get_f64(in);
    if (!in) throw InputError(path + ": truncated file");
    return rm;
}

}  // namespace moseg
