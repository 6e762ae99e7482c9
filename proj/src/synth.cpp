#include "moseg/synth.hpp"

#include <Eigen/Geometry>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "moseg/errors.hpp"
#include "moseg/rng.hpp"

namespace moseg {

namespace {

void check_rotation(const Eigen::Matrix3d& r, const std::string& where) {
    const double ortho = (r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
    if (ortho > 1e-9 || std::abs(r.determinant() - 1.0) > 1e-9)
        throw InputError("scene spec: rotation in " + where +
                         " is not orthonormal with determinant +1");
}

Eigen::Matrix3d axis_angle(const Eigen::Vector3d& axis, double angle) {
    return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

Eigen::Vector3d sample_local_point(const BodySpec& body, Rng& rng) {
    const Eigen::Vector3d& e = body.extent;
    switch (body.shape) {
        case BodyShape::Plane:
            return {rng.uniform_double(-0.5, 0.5) * e.x(), rng.uniform_double(-0.5, 0.5) * e.y(),
                    0.0};
        case BodyShape::Box: {
            // Pick a face weighted by area, then a uniform point on it.
            const double axy = e.x() * e.y(), axz = e.x() * e.z(), ayz = e.y() * e.z();
            const double total = 2.0 * (axy + axz + ayz);
            const double u = rng.uniform_double(0.0, total);
            const double sx = rng.uniform_double(-0.5, 0.5) * e.x();
            const double sy = rng.uniform_double(-0.5, 0.5) * e.y();
            const double sz = rng.uniform_double(-0.5, 0.5) * e.z();
            if (u < 2.0 * axy) return {sx, sy, (u < axy ? 0.5 : -0.5) * e.z()};
            if (u < 2.0 * axy + 2.0 * axz)
                return {sx, (u < 2.0 * axy + axz ? 0.5 : -0.5) * e.y(), sz};
            return {(u < 2.0 * (axy + axz) + ayz ? 0.5 : -0.5) * e.x(), sy, sz};
        }
        case BodyShape::ElongatedBar:
        case BodyShape::RandomCloud:
            return {rng.uniform_double(-0.5, 0.5) * e.x(), rng.uniform_double(-0.5, 0.5) * e.y(),
                    rng.uniform_double(-0.5, 0.5) * e.z()};
    }
    return Eigen::Vector3d::Zero();
}

const char* shape_name(BodyShape s) {
    switch (s) {
        case BodyShape::Plane: return "plane";
        case BodyShape::Box: return "box";
        case BodyShape::ElongatedBar: return "bar";
        case BodyShape::RandomCloud: return "cloud";
    }
    return "?";
}

BodyShape shape_from_name(const std::string& s) {
    if (s == "plane") return BodyShape::Plane;
    if (s == "box") return BodyShape::Box;
    if (s == "bar") return BodyShape::ElongatedBar;
    if (s == "cloud") return BodyShape::RandomCloud;
    throw InputError("scene spec: unknown body shape '" + s + "'");
}

nlohmann::json transform_to_json(const RigidTransform& t) {
    nlohmann::json j;
    auto& r = j["R"] = nlohmann::json::array();
    for (int i = 0; i < 3; ++i)
        r.push_back({t.rotation(i, 0), t.rotation(i, 1), t.rotation(i, 2)});
    j["t"] = {t.translation.x(), t.translation.y(), t.translation.z()};
    return j;
}

RigidTransform transform_from_json(const nlohmann::json& j) {
    RigidTransform t;
    const auto& r = j.at("R");
    for (int i = 0; i < 3; ++i)
        for (int c = 0; c < 3; ++c) t.rotation(i, c) = r.at(i).at(c).get<double>();
    for (int i = 0; i < 3; ++i) t.translation(i) = j.at("t").at(i).get<double>();
    return t;
}

/// Body b's world position of local point p at frame f.
Eigen::Vector3d body_point_world(const SceneSpec& spec, int b, const Eigen::Vector3d& local,
                                 int f) {
    const BodySpec& body = spec.bodies[b];
    const Eigen::Vector3d base = body.initial_pose.apply(local);
    if (spec.motions.empty() || spec.motions[b].empty()) return base;
    const RigidTransform& motion = spec.motions[b][f];
    const Eigen::Vector3d& origin = body.initial_pose.translation;
    return motion.rotation * (base - origin) + origin + motion.translation;
}

Eigen::Vector3d to_camera(const SceneSpec& spec, const Eigen::Vector3d& world, int f) {
    if (spec.camera.poses.empty()) return world;
    return spec.camera.poses[f].apply(world);
}

}  // namespace

void validate_scene_spec(const SceneSpec& spec) {
    if (spec.num_frames < 2) throw InputError("scene spec: num_frames must be >= 2");
    if (spec.bodies.empty()) throw InputError("scene spec: at least one body required");
    if (spec.camera.focal <= 0 || spec.camera.width <= 0 || spec.camera.height <= 0)
        throw InputError("scene spec: invalid camera intrinsics");
    if (!spec.camera.poses.empty() &&
        static_cast<int>(spec.camera.poses.size()) != spec.num_frames)
        throw InputError("scene spec: camera poses must cover every frame");
    for (size_t f = 0; f < spec.camera.poses.size(); ++f)
        check_rotation(spec.camera.poses[f].rotation, "camera pose " + std::to_string(f));
    if (!spec.motions.empty() && spec.motions.size() != spec.bodies.size())
        throw InputError("scene spec: motions must cover every body");
    for (size_t b = 0; b < spec.bodies.size(); ++b) {
        if (spec.bodies[b].num_points < 1)
            throw InputError("scene spec: body " + std::to_string(b) + " has no points");
        check_rotation(spec.bodies[b].initial_pose.rotation,
                       "body " + std::to_string(b) + " initial pose");
        if (!spec.motions.empty() && !spec.motions[b].empty()) {
            if (static_cast<int>(spec.motions[b].size()) != spec.num_frames)
                throw InputError("scene spec: body " + std::to_string(b) +
                                 " motion must cover every frame");
            for (int f = 0; f < spec.num_frames; ++f)
                check_rotation(spec.motions[b][f].rotation, "body " + std::to_string(b) +
                                                                " motion frame " +
                                                                std::to_string(f));
        }
    }
    if (spec.background_body &&
        (*spec.background_body < 0 ||
         *spec.background_body >= static_cast<int>(spec.bodies.size())))
        throw InputError("scene spec: background_body out of range");
    if (spec.num_injected_outliers < 0)
        throw InputError("scene spec: num_injected_outliers must be >= 0");
    if (spec.num_injected_outliers > 0 && spec.bodies.size() < 2)
        throw InputError("scene spec: injected outliers need at least two bodies");
    if (spec.noise_sigma < 0) throw InputError("scene spec: noise_sigma must be >= 0");
}

SceneResult generate_scene(const SceneSpec& spec) {
    validate_scene_spec(spec);
    const int num_frames = spec.num_frames;
    const int num_bodies = static_cast<int>(spec.bodies.size());
    const double cx = spec.camera.width / 2.0;
    const double cy = spec.camera.height / 2.0;
    Rng root(spec.seed);

    auto label_of_body = [&](int b) {
        if (spec.background_body && *spec.background_body == b) return 0;
        return b + 1;
    };

    struct PendingTrack {
        int body = -1;  // -1 for injected
        int label = 0;
        std::vector<double> xs, ys;
        std::vector<bool> vis;
        bool injected = false;
        int switch_frame = -1;
    };
    std::vector<PendingTrack> pending;

    SceneResult result;
    result.body_points_cam.resize(num_bodies);

    auto project = [&](const Eigen::Vector3d& pc, double& px, double& py) {
        if (pc.z() <= 1e-9) return false;
        px = spec.camera.focal * pc.x() / pc.z() + cx;
        py = spec.camera.focal * pc.y() / pc.z() + cy;
        return px >= 0.0 && px < spec.camera.width && py >= 0.0 && py < spec.camera.height;
    };

    for (int b = 0; b < num_bodies; ++b) {
        Rng shape_rng = root.derive(1, static_cast<std::uint64_t>(b));
        Rng noise_rng = root.derive(2, static_cast<std::uint64_t>(b));
        result.body_points_cam[b].assign(num_frames,
                                         Eigen::Matrix3Xd(3, spec.bodies[b].num_points));
        for (int p = 0; p < spec.bodies[b].num_points; ++p) {
            const Eigen::Vector3d local = sample_local_point(spec.bodies[b], shape_rng);
            PendingTrack t;
            t.body = b;
            t.label = label_of_body(b);
            t.xs.resize(num_frames, 0.0);
            t.ys.resize(num_frames, 0.0);
            t.vis.resize(num_frames, false);
            for (int f = 0; f < num_frames; ++f) {
                const Eigen::Vector3d pc =
                    to_camera(spec, body_point_world(spec, b, local, f), f);
                result.body_points_cam[b][f].col(p) = pc;
                double px = 0, py = 0;
                const bool vis = project(pc, px, py);
                // Noise drawn unconditionally to keep the stream aligned.
                const double nx = noise_rng.normal();
                const double ny = noise_rng.normal();
                if (vis) {
                    t.vis[f] = true;
                    t.xs[f] = px + spec.noise_sigma * nx;
                    t.ys[f] = py + spec.noise_sigma * ny;
                }
            }
            pending.push_back(std::move(t));
        }
    }

    // Injected outliers: tracks that adhere to one body, then switch to
    // following another body's motion mid-sequence.
    Rng inj_rng = root.derive(3);
    for (int k = 0; k < spec.num_injected_outliers; ++k) {
        std::vector<int> foreground;
        for (int b = 0; b < num_bodies; ++b)
            if (!spec.background_body || *spec.background_body != b) foreground.push_back(b);
        const int b1 = foreground.empty()
                           ? static_cast<int>(inj_rng.uniform_index(num_bodies))
                           : foreground[inj_rng.uniform_index(foreground.size())];
        int b2 = static_cast<int>(inj_rng.uniform_index(num_bodies - 1));
        if (b2 >= b1) ++b2;
        const int switch_frame = 1 + static_cast<int>(inj_rng.uniform_index(num_frames - 1));
        const Eigen::Vector3d p1 = sample_local_point(spec.bodies[b1], inj_rng);
        const Eigen::Vector3d p2 = sample_local_point(spec.bodies[b2], inj_rng);

        PendingTrack t;
        t.body = -1;
        t.label = label_of_body(b1);
        t.injected = true;
        t.switch_frame = switch_frame;
        t.xs.resize(num_frames, 0.0);
        t.ys.resize(num_frames, 0.0);
        t.vis.resize(num_frames, false);
        for (int f = 0; f < num_frames; ++f) {
            const int b = f < switch_frame ? b1 : b2;
            const Eigen::Vector3d& local = f < switch_frame ? p1 : p2;
            const Eigen::Vector3d pc = to_camera(spec, body_point_world(spec, b, local, f), f);
            double px = 0, py = 0;
            const bool vis = project(pc, px, py);
            const double nx = inj_rng.normal();
            const double ny = inj_rng.normal();
            if (vis) {
                t.vis[f] = true;
                t.xs[f] = px + spec.noise_sigma * nx;
                t.ys[f] = py + spec.noise_sigma * ny;
            }
        }
        pending.push_back(std::move(t));
    }

    // Assemble, dropping tracks visible in < 2 frames.
    std::vector<int> kept;
    std::vector<int> body_survivors(num_bodies, 0);
    for (size_t i = 0; i < pending.size(); ++i) {
        const int vis =
            static_cast<int>(std::count(pending[i].vis.begin(), pending[i].vis.end(), true));
        if (vis >= 2) {
            kept.push_back(static_cast<int>(i));
            if (pending[i].body >= 0) ++body_survivors[pending[i].body];
        } else {
            ++result.dropped_short_tracks;
        }
    }
    for (int b = 0; b < num_bodies; ++b)
        if (body_survivors[b] == 0)
            throw NumericalError("generate_scene: body " + std::to_string(b) +
                                 " is entirely invisible");

    const int n = static_cast<int>(kept.size());
    TrackSet ts;
    ts.x.setZero(n, num_frames);
    ts.y.setZero(n, num_frames);
    ts.visible.setConstant(n, num_frames, false);
    ts.labels = std::vector<int>(n);
    result.track_body.resize(n);
    for (int r = 0; r < n; ++r) {
        const PendingTrack& t = pending[kept[r]];
        for (int f = 0; f < num_frames; ++f) {
            ts.visible(r, f) = t.vis[f];
            if (t.vis[f]) {
                ts.x(r, f) = t.xs[f];
                ts.y(r, f) = t.ys[f];
            }
        }
        (*ts.labels)[r] = t.label;
        result.track_body[r] = t.body;
        if (t.injected) {
            result.injected_indices.push_back(r);
            result.injected_switch_frames.push_back(t.switch_frame);
        }
    }
    validate_trackset(ts);
    result.tracks = std::move(ts);
    return result;
}

std::string scene_spec_to_json_text(const SceneSpec& spec) {
    nlohmann::json j;
    j["camera"]["focal"] = spec.camera.focal;
    j["camera"]["width"] = spec.camera.width;
    j["camera"]["height"] = spec.camera.height;
    if (!spec.camera.poses.empty()) {
        auto& poses = j["camera"]["poses"] = nlohmann::json::array();
        for (const auto& p : spec.camera.poses) poses.push_back(transform_to_json(p));
    }
    auto& bodies = j["bodies"] = nlohmann::json::array();
    for (const auto& b : spec.bodies) {
        nlohmann::json jb;
        jb["shape"] = shape_name(b.shape);
        jb["num_points"] = b.num_points;
        jb["extent"] = {b.extent.x(), b.extent.y(), b.extent.z()};
        jb["pose"] = transform_to_json(b.initial_pose);
        bodies.push_back(std::move(jb));
    }
    auto& motions = j["motions"] = nlohmann::json::array();
    for (const auto& per_body : spec.motions) {
        nlohmann::json jm = nlohmann::json::array();
        for (const auto& m : per_body) jm.push_back(transform_to_json(m));
        motions.push_back(std::move(jm));
    }
    j["num_frames"] = spec.num_frames;
    j["noise_sigma"] = spec.noise_sigma;
    j["num_injected_outliers"] = spec.num_injected_outliers;
    if (spec.background_body) j["background_body"] = *spec.background_body;
    j["seed"] = spec.seed;
    return j.dump(2) + "\n";
}

SceneSpec scene_spec_from_json_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("scene spec: ") + e.what());
    }
    try {
        SceneSpec spec;
        spec.camera.focal = j.at("camera").at("focal").get<double>();
        spec.camera.width = j.at("camera").at("width").get<int>();
        spec.camera.height = j.at("camera").at("height").get<int>();
        if (j.at("camera").contains("poses"))
            for (const auto& p : j.at("camera").at("poses"))
                spec.camera.poses.push_back(transform_from_json(p));
        for (const auto& jb : j.at("bodies")) {
            BodySpec b;
            b.shape = shape_from_name(jb.at("shape").get<std::string>());
            b.num_points = jb.at("num_points").get<int>();
            for (int i = 0; i < 3; ++i) b.extent(i) = jb.at("extent").at(i).get<double>();
            b.initial_pose = transform_from_json(jb.at("pose"));
            spec.bodies.push_back(std::move(b));
        }
        if (j.contains("motions"))
            for (const auto& jm : j.at("motions")) {
                std::vector<RigidTransform> per_body;
                for (const auto& m : jm) per_body.push_back(transform_from_json(m));
                spec.motions.push_back(std::move(per_body));
            }
        spec.num_frames = j.at("num_frames").get<int>();
        spec.noise_sigma = j.at("noise_sigma").get<double>();
        spec.num_injected_outliers = j.value("num_injected_outliers", 0);
        if (j.contains("background_body") && !j.at("background_body").is_null())
            spec.background_body = j.at("background_body").get<int>();
        spec.seed = j.at("seed").get<std::uint64_t>();
        validate_scene_spec(spec);
        return spec;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("scene spec: ") + e.what());
    }
}

SceneSpec scene_spec_from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError(path + ": cannot open for reading");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return scene_spec_from_json_text(text);
}

namespace {

std::vector<RigidTransform> linear_motion(int num_frames, const Eigen::Vector3d& axis,
                                          double angle_per_frame,
                                          const Eigen::Vector3d& step) {
    std::vector<RigidTransform> motion(num_frames);
    for (int f = 0; f < num_frames; ++f) {
        motion[f].rotation = axis_angle(axis, angle_per_frame * f);
        motion[f].translation = step * static_cast<double>(f);
    }
    return motion;
}

BodySpec make_body(BodyShape shape, int num_points, const Eigen::Vector3d& extent,
                   const Eigen::Vector3d& position,
                   const Eigen::Matrix3d& orientation = Eigen::Matrix3d::Identity()) {
    BodySpec b;
    b.shape = shape;
    b.num_points = num_points;
    b.extent = extent;
    b.initial_pose.rotation = orientation;
    b.initial_pose.translation = position;
    return b;
}

}  // namespace

SceneSpec make_general_scene(int num_bodies, int total_points, int num_frames,
                             std::uint64_t seed, double noise_sigma) {
    if (num_bodies < 2 || num_bodies > 4)
        throw InputError("make_general_scene: num_bodies must be in [2, 4]");
    SceneSpec spec;
    spec.num_frames = num_frames;
    spec.noise_sigma = noise_sigma;
    spec.seed = seed;
    const int per_body = total_points / num_bodies;

    // Compact bodies at different depths. Translation directions are kept
    // far from antiparallel and every body rotates about a distinct axis:
    // opposite pure translations share one epipolar geometry and would make
    // the fundamental-matrix view unable to separate them.
    spec.bodies.push_back(
        make_body(BodyShape::RandomCloud, per_body, {4, 4, 4}, {-2.4, 0.2, 14.0}));
    spec.motions.push_back(
        linear_motion(num_frames, {0.3, 1.0, 0.2}, 0.030, {0.28, 0.05, 0.10}));

    spec.bodies.push_back(make_body(BodyShape::Box, per_body, {3, 3, 3}, {2.6, 0.4, 17.0}));
    spec.motions.push_back(
        linear_motion(num_frames, {1.0, 0.2, 0.0}, -0.035, {0.02, -0.30, 0.14}));

    if (num_bodies >= 3) {
        spec.bodies.push_back(
            make_body(BodyShape::ElongatedBar, per_body, {6.0, 0.35, 0.35}, {0.0, -2.2, 12.0}));
        spec.motions.push_back(
            linear_motion(num_frames, {0.0, 0.2, 1.0}, 0.040, {-0.06, 0.05, -0.35}));
    }
    if (num_bodies >= 4) {
        spec.bodies.push_back(
            make_body(BodyShape::RandomCloud, per_body, {3, 3, 2}, {0.3, 2.3, 15.0}));
        spec.motions.push_back(
            linear_motion(num_frames, {0.5, 0.5, 0.7}, -0.030, {-0.22, 0.20, 0.12}));
    }
    return spec;
}

SceneSpec make_two_body_general_scene(std::uint64_t seed, double noise_sigma) {
    return make_general_scene(2, 300, 10, seed, noise_sigma);
}

SceneSpec make_three_body_general_scene(std::uint64_t seed, double noise_sigma) {
    return make_general_scene(3, 300, 10, seed, noise_sigma);
}

SceneSpec make_rotation_dominant_planes_scene(std::uint64_t seed, double noise_sigma) {
    SceneSpec spec;
    spec.num_frames = 10;
    spec.noise_sigma = noise_sigma;
    spec.seed = seed;
    spec.background_body = 0;

    // Scene depth ~11-16; every translation stays under 1% of that per the
    // rotation-dominant regime, while rotations carry the motion. With no
    // parallax the epipolar geometry is ill-conditioned but each plane's
    // homography stays exact.
    spec.camera.poses.resize(spec.num_frames);
    for (int f = 0; f < spec.num_frames; ++f) {
        spec.camera.poses[f].rotation =
            axis_angle({0, 1, 0}, 0.012 * f) * axis_angle({1, 0, 0}, 0.005 * f);
        spec.camera.poses[f].translation = Eigen::Vector3d(0.010, 0.0, 0.005) * f;
    }

    spec.bodies.push_back(make_body(BodyShape::Plane, 140, {15, 11, 0},
                                    {0.0, 0.0, 16.0},
                                    axis_angle({1, 0, 0}, 0.15)));
    spec.motions.emplace_back();  // static background plane

    spec.bodies.push_back(make_body(BodyShape::Plane, 80, {4.0, 3.0, 0}, {-2.0, 1.0, 11.0},
                                    axis_angle({0, 1, 0}, -0.3)));
    spec.motions.push_back(
        linear_motion(spec.num_frames, {0.2, 1.0, 0.0}, 0.050, {0.050, 0.010, 0.020}));

    spec.bodies.push_back(make_body(BodyShape::Plane, 80, {3.2, 3.2, 0}, {3.0, -1.0, 13.0},
                                    axis_angle({0, 1, 0}, 0.25)));
    spec.motions.push_back(
        linear_motion(spec.num_frames, {1.0, 0.3, 0.1}, -0.060, {-0.040, 0.035, -0.030}));
    return spec;
}

SceneSpec make_strong_forward_translation_scene(std::uint64_t seed, double noise_sigma) {
    SceneSpec spec;
    spec.num_frames = 10;
    spec.noise_sigma = noise_sigma;
    spec.seed = seed;
    spec.background_body = 0;

    // Camera drives forward through a deep static scene.
    spec.camera.poses.resize(spec.num_frames);
    for (int f = 0; f < spec.num_frames; ++f)
        spec.camera.poses[f].translation = Eigen::Vector3d(0.0, 0.0, 0.45) * f;

    spec.bodies.push_back(
        make_body(BodyShape::RandomCloud, 150, {12, 9, 8}, {0.0, 0.0, 20.0}));
    spec.motions.emplace_back();

    spec.bodies.push_back(make_body(BodyShape::Box, 90, {2.5, 2.5, 2.5}, {-2.2, 0.5, 14.0}));
    spec.motions.push_back(
        linear_motion(spec.num_frames, {0.2, 1.0, 0.1}, 0.012, {0.24, 0.02, -0.30}));

    spec.bodies.push_back(
        make_body(BodyShape::RandomCloud, 80, {2.5, 2.5, 2}, {2.6, -0.6, 11.0}));
    spec.motions.push_back(
        linear_motion(spec.num_frames, {1.0, 0.1, 0.3}, -0.015, {-0.18, 0.10, 0.40}));
    return spec;
}

SceneSpec make_preset_scene(const std::string& name, std::uint64_t seed, double noise_sigma) {
    if (name == "two-body-general") return make_two_body_general_scene(seed, noise_sigma);
    if (name == "three-body-general") return make_three_body_general_scene(seed, noise_sigma);
    if (name == "rotation-dominant-planes")
        return make_rotation_dominant_planes_scene(seed, noise_sigma);
    if (name == "strong-forward-translation")
        return make_strong_forward_translation_scene(seed, noise_sigma);
    throw InputError("unknown scene preset '" + name +
                     "' (expected two-body-general, three-body-general, "
                     "rotation-dominant-planes or strong-forward-translation)");
}

}  // namespace moseg
