#include "moseg/trackset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <json.hpp>

#include "moseg/errors.hpp"
#include "moseg/geometry.hpp"
#include "moseg/rng.hpp"
#include "moseg/stats.hpp"

namespace moseg {

namespace {

// Accumulated-residual scores below this are numerically zero; keeps the
// noise-free case an exact no-op of the flagging rule.
constexpr double kScoreFloor = 1e-15;

[[noreturn]] void fail_line(const std::string& path, int line, const std::string& msg) {
    throw InputError(path + ":" + std::to_string(line) + ": " + msg);
}

std::string fmt_coord(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

struct RawTrack {
    int id = 0;
    int label = 0;
    std::vector<double> xs, ys;
    std::vector<bool> vis;
};

LoadResult assemble(std::vector<RawTrack> raw, int num_frames, bool has_labels,
                    const std::string& path) {
    std::vector<RawTrack> kept;
    int dropped = 0;
    for (auto& t : raw) {
        const int visible_frames =
            static_cast<int>(std::count(t.vis.begin(), t.vis.end(), true));
        if (visible_frames < 2)
            ++dropped;
        else
            kept.push_back(std::move(t));
    }
    if (kept.empty()) throw InputError(path + ": no track is visible in at least 2 frames");

    const int n = static_cast<int>(kept.size());
    TrackSet ts;
    ts.x.setZero(n, num_frames);
    ts.y.setZero(n, num_frames);
    ts.visible.setConstant(n, num_frames, false);
    if (has_labels) ts.labels = std::vector<int>(n);
    for (int i = 0; i < n; ++i) {
        for (int f = 0; f < num_frames; ++f) {
            ts.visible(i, f) = kept[i].vis[f];
            ts.x(i, f) = kept[i].xs[f];
            ts.y(i, f) = kept[i].ys[f];
        }
        if (has_labels) (*ts.labels)[i] = kept[i].label;
    }
    validate_trackset(ts);
    return LoadResult{std::move(ts), dropped};
}

LoadResult load_tsv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError(path + ": cannot open for reading");
    std::string line;
    int lineno = 0;
    auto next_line = [&]() -> bool {
        while (std::getline(in, line)) {
            ++lineno;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (!line.empty()) return true;
        }
        return false;
    };

    if (!next_line()) throw InputError(path + ": empty file");
    int n = 0, f = 0, has_labels = 0;
    {
        std::istringstream ss(line);
        std::string extra;
        if (!(ss >> n >> f >> has_labels) || (ss >> extra))
            fail_line(path, lineno, "malformed header, expected 'N F has_labels'");
        if (n < 1) fail_line(path, lineno, "N must be >= 1");
        if (f < 2) fail_line(path, lineno, "F must be >= 2");
        if (has_labels != 0 && has_labels != 1)
            fail_line(path, lineno, "has_labels must be 0 or 1");
    }

    std::vector<RawTrack> raw;
    raw.reserve(n);
    for (int i = 0; i < n; ++i) {
        if (!next_line()) fail_line(path, lineno, "unexpected end of file in point block");
        RawTrack t;
        {
            std::istringstream ss(line);
            std::string extra;
            bool ok = has_labels ? static_cast<bool>(ss >> t.id >> t.label)
                                 : static_cast<bool>(ss >> t.id);
            if (!ok || (ss >> extra))
                fail_line(path, lineno,
                          has_labels ? "malformed block line, expected 'point_id label'"
                                     : "malformed block line, expected 'point_id'");
            if (has_labels && t.label < 0) fail_line(path, lineno, "label must be >= 0");
        }
        t.xs.resize(f);
        t.ys.resize(f);
        t.vis.resize(f);
        for (int k = 0; k < f; ++k) {
            if (!next_line()) fail_line(path, lineno, "unexpected end of file in frame rows");
            std::istringstream ss(line);
            int frame = 0, v = 0;
            double px = 0, py = 0;
            std::string extra;
            if (!(ss >> frame >> v >> px >> py) || (ss >> extra))
                fail_line(path, lineno, "malformed frame row, expected 'f v x y'");
            if (frame != k + 1)
                fail_line(path, lineno, "frame rows must run 1.." + std::to_string(f) +
                                            " in order, got " + std::to_string(frame));
            if (v != 0 && v != 1) fail_line(path, lineno, "visibility must be 0 or 1");
            if (v == 0 && (px != 0.0 || py != 0.0))
                fail_line(path, lineno, "coordinates must be '0 0' when invisible");
            if (v == 1 && (!std::isfinite(px) || !std::isfinite(py)))
                fail_line(path, lineno, "non-finite coordinate on a visible frame");
            t.vis[k] = v == 1;
            t.xs[k] = px;
            t.ys[k] = py;
        }
        raw.push_back(std::move(t));
    }
    if (next_line()) fail_line(path, lineno, "trailing content after last point block");
    return assemble(std::move(raw), f, has_labels == 1, path);
}

LoadResult load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError(path + ": cannot open for reading");
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(path + ": " + e.what());
    }
    try {
        const int n = doc.at("num_points").get<int>();
        const int f = doc.at("num_frames").get<int>();
        if (n < 1) throw InputError(path + ": num_points must be >= 1");
        if (f < 2) throw InputError(path + ": num_frames must be >= 2");
        const auto& pts = doc.at("points");
        if (static_cast<int>(pts.size()) != n)
            throw InputError(path + ": points array length != num_points");
        bool has_labels = !pts.empty() && pts.front().contains("label");
        std::vector<RawTrack> raw;
        raw.reserve(n);
        for (const auto& p : pts) {
            RawTrack t;
            t.id = p.at("id").get<int>();
            if (p.contains("label") != has_labels)
                throw InputError(path + ": label must be present on all points or none");
            if (has_labels) {
                t.label = p.at("label").get<int>();
                if (t.label < 0) throw InputError(path + ": label must be >= 0");
            }
            const auto& xy = p.at("xy");
            const auto& vis = p.at("visible");
            if (static_cast<int>(xy.size()) != f || static_cast<int>(vis.size()) != f)
                throw InputError(path + ": xy/visible length != num_frames for point id " +
                                 std::to_string(t.id));
            t.xs.resize(f);
            t.ys.resize(f);
            t.vis.resize(f);
            for (int k = 0; k < f; ++k) {
                t.vis[k] = vis[k].get<bool>();
                t.xs[k] = xy[k].at(0).get<double>();
                t.ys[k] = xy[k].at(1).get<double>();
                if (!t.vis[k] && (t.xs[k] != 0.0 || t.ys[k] != 0.0))
                    throw InputError(path + ": coordinates must be [0,0] when invisible (id " +
                                     std::to_string(t.id) + ")");
                if (t.vis[k] && (!std::isfinite(t.xs[k]) || !std::isfinite(t.ys[k])))
                    throw InputError(path + ": non-finite coordinate (id " +
                                     std::to_string(t.id) + ")");
            }
            raw.push_back(std::move(t));
        }
        return assemble(std::move(raw), f, has_labels, path);
    } catch (const nlohmann::json::exception& e) {
        throw InputError(path + ": " + e.what());
    }
}

}  // namespace

void validate_trackset(const TrackSet& ts) {
    const int n = ts.num_points();
    const int f = ts.num_frames();
    if (n < 1) throw InputError("TrackSet: N must be >= 1");
    if (f < 2) throw InputError("TrackSet: F must be >= 2");
    if (ts.y.rows() != n || ts.y.cols() != f || ts.visible.rows() != n || ts.visible.cols() != f)
        throw InputError("TrackSet: field shapes disagree");
    if (ts.labels && static_cast<int>(ts.labels->size()) != n)
        throw InputError("TrackSet: labels length != N");
    if (ts.outlier_flags && static_cast<int>(ts.outlier_flags->size()) != n)
        throw InputError("TrackSet: outlier_flags length != N");
    for (int i = 0; i < n; ++i) {
        int vis = 0;
        for (int k = 0; k < f; ++k)
            if (ts.visible(i, k)) {
                ++vis;
                if (!std::isfinite(ts.x(i, k)) || !std::isfinite(ts.y(i, k)))
                    throw InputError("TrackSet: non-finite coordinate at visible frame (point " +
                                     std::to_string(i) + ")");
            }
        if (vis < 2)
            throw InputError("TrackSet: point " + std::to_string(i) +
                             " visible in fewer than 2 frames");
    }
    if (ts.labels)
        for (int v : *ts.labels)
            if (v < 0) throw InputError("TrackSet: negative label");
}

LoadResult load_trackset(const std::string& path, TrackFormat format) {
    return format == TrackFormat::Tsv ? load_tsv(path) : load_json(path);
}

void save_trackset(const TrackSet& ts, const std::string& path, TrackFormat format) {
    validate_trackset(ts);
    std::ofstream out(path);
    if (!out) throw InputError(path + ": cannot open for writing");
    const int n = ts.num_points();
    const int f = ts.num_frames();
    const bool has_labels = ts.labels.has_value();
    if (format == TrackFormat::Tsv) {
        out << n << ' ' << f << ' ' << (has_labels ? 1 : 0) << '\n';
        for (int i = 0; i < n; ++i) {
            out << i;
            if (has_labels) out << ' ' << (*ts.labels)[i];
            out << '\n';
            for (int k = 0; k < f; ++k) {
                if (ts.visible(i, k))
                    out << (k + 1) << " 1 " << fmt_coord(ts.x(i, k)) << ' '
                        << fmt_coord(ts.y(i, k)) << '\n';
                else
                    out << (k + 1) << " 0 0 0\n";
            }
        }
    } else {
        nlohmann::json doc;
        doc["num_points"] = n;
        doc["num_frames"] = f;
        auto& pts = doc["points"] = nlohmann::json::array();
        for (int i = 0; i < n; ++i) {
            nlohmann::json p;
            p["id"] = i;
            if (has_labels) p["label"] = (*ts.labels)[i];
            auto& xy = p["xy"] = nlohmann::json::array();
            auto& vis = p["visible"] = nlohmann::json::array();
            for (int k = 0; k < f; ++k) {
                xy.push_back({ts.visible(i, k) ? ts.x(i, k) : 0.0,
                              ts.visible(i, k) ? ts.y(i, k) : 0.0});
                vis.push_back(static_cast<bool>(ts.visible(i, k)));
            }
            pts.push_back(std::move(p));
        }
        out << doc.dump(2) << '\n';
    }
    if (!out) throw InputError(path + ": write failed");
}

TrackSet subsample_background(const TrackSet& ts, double fraction, std::uint64_t seed) {
    if (!ts.labels) throw InputError("subsample_background: labels required");
    if (!(fraction > 0.0 && fraction <= 1.0))
        throw InputError("subsample_background: fraction must be in (0, 1]");
    const int n = ts.num_points();
    std::vector<int> background;
    for (int i = 0; i < n; ++i)
        if ((*ts.labels)[i] == 0) background.push_back(i);

    const int keep_bg = static_cast<int>(
        std::ceil(fraction * static_cast<double>(background.size()) - 1e-12));
    std::vector<char> keep(n, 1);
    if (keep_bg < static_cast<int>(background.size())) {
        Rng rng(seed);
        const std::vector<int> chosen = rng.sample_without_replacement(background, keep_bg);
        for (int i : background) keep[i] = 0;
        for (int i : chosen) keep[i] = 1;
    }

    std::vector<int> rows;
    for (int i = 0; i < n; ++i)
        if (keep[i]) rows.push_back(i);

    TrackSet out;
    const int m = static_cast<int>(rows.size());
    const int f = ts.num_frames();
    out.x.resize(m, f);
    out.y.resize(m, f);
    out.visible.resize(m, f);
    out.labels = std::vector<int>(m);
    if (ts.outlier_flags) out.outlier_flags = std::vector<std::uint8_t>(m);
    for (int r = 0; r < m; ++r) {
        out.x.row(r) = ts.x.row(rows[r]);
        out.y.row(r) = ts.y.row(rows[r]);
        out.visible.row(r) = ts.visible.row(rows[r]);
        (*out.labels)[r] = (*ts.labels)[rows[r]];
        if (ts.outlier_flags) (*out.outlier_flags)[r] = (*ts.outlier_flags)[rows[r]];
    }
    return out;
}

OutlierResult remove_outliers(const TrackSet& ts, const OutlierParams& params) {
    if (!ts.labels) throw InputError("remove_outliers: labels required");
    validate_trackset(ts);
    const int n = ts.num_points();
    const int num_frames = ts.num_frames();
    const double tol_sq = params.inlier_tol * params.inlier_tol;

    std::map<int, std::vector<int>> groups;
    for (int i = 0; i < n; ++i) groups[(*ts.labels)[i]].push_back(i);

    OutlierResult result;
    result.tracks = ts;
    result.tracks.outlier_flags = std::vector<std::uint8_t>(n, 0);
    const Rng root(params.seed);

    for (const auto& [label, members] : groups) {
        GroupOutlierStats stats;
        stats.label = label;
        stats.point_indices = members;

        // Per consecutive frame pair, a fundamental matrix fitted on this
        // group by RANSAC then refit on its inliers.
        std::vector<std::optional<Hypothesis>> pair_model(num_frames - 1);
        for (int f = 0; f + 1 < num_frames; ++f) {
            std::vector<int> covis;
            for (int i : members)
                if (ts.visible(i, f) && ts.visible(i, f + 1)) covis.push_back(i);
            if (static_cast<int>(covis.size()) < 8) {
                result.warnings.push_back("group " + std::to_string(label) + " pair (" +
                                          std::to_string(f + 1) + "," + std::to_string(f + 2) +
                                          "): fewer than 8 co-visible points, skipped");
                continue;
            }
            // Canonical content order: the fit must not depend on row order.
            std::sort(covis.begin(), covis.end(), [&](int a, int b) {
                const auto ka = std::make_tuple(ts.x(a, f), ts.y(a, f), ts.x(a, f + 1),
                                                ts.y(a, f + 1));
                const auto kb = std::make_tuple(ts.x(b, f), ts.y(b, f), ts.x(b, f + 1),
                                                ts.y(b, f + 1));
                return ka < kb;
            });
            std::vector<int> positions(covis.size());
            for (size_t i = 0; i < positions.size(); ++i) positions[i] = static_cast<int>(i);

            Rng rng = root.derive(static_cast<std::uint64_t>(label),
                                  static_cast<std::uint64_t>(f));
            auto corr_at = [&](int pos) {
                const int i = covis[pos];
                return Correspondence{{ts.x(i, f), ts.y(i, f)}, {ts.x(i, f + 1), ts.y(i, f + 1)}};
            };

            int best_inliers = -1;
            Hypothesis best_model;
            for (int it = 0; it < params.ransac_iters; ++it) {
                const std::vector<int> sample = rng.sample_without_replacement(positions, 8);
                std::vector<Correspondence> corr;
                corr.reserve(8);
                for (int pos : sample) corr.push_back(corr_at(pos));
                Hypothesis h;
                try {
                    h = fit_model(ModelKind::Fundamental, corr, f, f + 1);
                } catch (const DegenerateSampleError&) {
                    continue;
                }
                int inliers = 0;
                for (size_t pos = 0; pos < covis.size(); ++pos) {
                    const auto c = corr_at(static_cast<int>(pos));
                    if (sampson_error(h, c.first, c.second) <= tol_sq) ++inliers;
                }
                if (inliers > best_inliers) {
                    best_inliers = inliers;
                    best_model = h;
                }
            }
            if (best_inliers < 0) {
                result.warnings.push_back("group " + std::to_string(label) + " pair (" +
                                          std::to_string(f + 1) + "," + std::to_string(f + 2) +
                                          "): every RANSAC sample degenerate, skipped");
                continue;
            }
            std::vector<Correspondence> inlier_corr;
            for (size_t pos = 0; pos < covis.size(); ++pos) {
                const auto c = corr_at(static_cast<int>(pos));
                if (sampson_error(best_model, c.first, c.second) <= tol_sq)
                    inlier_corr.push_back(c);
            }
            if (static_cast<int>(inlier_corr.size()) >= 8) {
                try {
                    best_model = fit_model(ModelKind::Fundamental, inlier_corr, f, f + 1);
                } catch (const DegenerateSampleError&) {
                    // keep the minimal-sample model
                }
            }
            pair_model[f] = best_model;
        }

        stats.fitted = std::any_of(pair_model.begin(), pair_model.end(),
                                   [](const auto& m) { return m.has_value(); });
        if (!stats.fitted) {
            result.warnings.push_back("group " + std::to_string(label) +
                                      ": no frame pair fittable, group left unflagged");
            result.groups.push_back(std::move(stats));
            continue;
        }

        stats.scores.resize(members.size(), 0.0);
        for (size_t mi = 0; mi < members.size(); ++mi) {
            const int i = members[mi];
            double total = 0.0;
            int frames_visible = 0;
            for (int f = 0; f < num_frames; ++f)
                if (ts.visible(i, f)) ++frames_visible;
            for (int f = 0; f + 1 < num_frames; ++f) {
                if (!pair_model[f] || !ts.visible(i, f) || !ts.visible(i, f + 1)) continue;
                const double e = sampson_error(*pair_model[f], {ts.x(i, f), ts.y(i, f)},
                                               {ts.x(i, f + 1), ts.y(i, f + 1)});
                if (std::isfinite(e)) total += e;
            }
            double score = total / frames_visible;
            if (score < kScoreFloor) score = 0.0;
            stats.scores[mi] = score;
        }

        std::vector<double> sorted = stats.scores;
        std::sort(sorted.begin(), sorted.end());
        const double q1 = quantile_sorted(sorted, 0.25);
        const double q3 = quantile_sorted(sorted, 0.75);
        const double iqr = q3 - q1;
        stats.threshold = q3 + 7.0 * iqr;
        if (iqr > 0.0) {
            for (size_t mi = 0; mi < members.size(); ++mi)
                if (stats.scores[mi] > stats.threshold) {
                    (*result.tracks.outlier_flags)[members[mi]] = 1;
                    ++result.num_flagged;
                }
        }
        result.groups.push_back(std::move(stats));
    }
    return result;
}

}  // namespace moseg
