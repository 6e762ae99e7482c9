#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "moseg/trackset.hpp"

namespace moseg {

/// Rigid transform x -> R x + t. Rotations must be orthonormal with
/// determinant +1 (checked to 1e-9 when a scene is validated).
struct RigidTransform {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();

    Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return rotation * p + translation; }
};

enum class BodyShape { Plane, Box, ElongatedBar, RandomCloud };

struct BodySpec {
    BodyShape shape = BodyShape::RandomCloud;
    int num_points = 100;
    Eigen::Vector3d extent = Eigen::Vector3d(1, 1, 1);  // local size per axis
    RigidTransform initial_pose;                        // local -> world at frame 0
};

struct CameraSpec {
    double focal = 600.0;  // pixels
    int width = 800;
    int height = 600;
    /// World -> camera per frame: x_cam = R x_world + t. Empty = static camera
    /// at the origin. Principal point sits at the image center.
    std::vector<RigidTransform> poses;
};

/// Synthetic rigid scene. Body b's world points at frame f are
///   R_f (X0 - c0) + c0 + t_f
/// where X0 is the initial-pose placement, c0 the body's placement origin and
/// (R_f, t_f) = motions[b][f]; i.e. bodies rotate about their own placement
/// origin and then translate. motions[b] must have num_frames entries (frame
/// 0 normally the identity); an empty list means the body is static.
struct SceneSpec {
    CameraSpec camera;
    std::vector<BodySpec> bodies;
    std::vector<std::vector<RigidTransform>> motions;  // [body][frame]
    int num_frames = 2;
    double noise_sigma = 0.0;  // pixels
    int num_injected_outliers = 0;
    std::optional<int> background_body;  // gets label 0; others label index+1
    std::uint64_t seed = 0;
};

void validate_scene_spec(const SceneSpec& spec);

SceneSpec scene_spec_from_json_file(const std::string& path);
SceneSpec scene_spec_from_json_text(const std::string& text);
std::string scene_spec_to_json_text(const SceneSpec& spec);

struct SceneResult {
    TrackSet tracks;
    /// Indices (into tracks) of injected outlier tracks that switch bodies
    /// mid-sequence.
    std::vector<int> injected_indices;
    /// Frame where each injected track switches body.
    std::vector<int> injected_switch_frames;
    int dropped_short_tracks = 0;
    /// Noise-free camera-space 3D points per body and frame (column = point),
    /// kept for geometric checks; injected tracks are not included.
    std::vector<std::vector<Eigen::Matrix3Xd>> body_points_cam;
    /// Row ranges of each body in `tracks` before dropping: body b's
    /// surviving tracks are the rows whose recorded body id is b.
    std::vector<int> track_body;  // length = tracks.num_points(), -1 for injected
};

/// Pinhole projection x = f*X/Z + cx with per-frame Gaussian pixel noise.
/// Points behind the camera or outside the image are invisible in that
/// frame; tracks visible in < 2 frames are dropped. A body none of whose
/// tracks survives is an error. Deterministic given spec.seed.
SceneResult generate_scene(const SceneSpec& spec);

/// Named scene regimes used throughout the tests and CLI.
///   two_body_general / three_body_general: compact bodies, general motion
///     with both rotation and translation.
///   rotation_dominant_planes: planar bodies, camera and body translations
///     under 1% of scene depth (homography-friendly, F ill-conditioned).
///   strong_forward_translation: camera driving forward through a deep scene.
SceneSpec make_two_body_general_scene(std::uint64_t seed, double noise_sigma);
SceneSpec make_three_body_general_scene(std::uint64_t seed, double noise_sigma);
SceneSpec make_rotation_dominant_planes_scene(std::uint64_t seed, double noise_sigma);
SceneSpec make_strong_forward_translation_scene(std::uint64_t seed, double noise_sigma);

/// General-motion scene with `num_bodies` in {2,..,4} and roughly
/// total_points points split evenly.
SceneSpec make_general_scene(int num_bodies, int total_points, int num_frames,
                             std::uint64_t seed, double noise_sigma);

/// Look up a preset by name ("two-body-general", "three-body-general",
/// "rotation-dominant-planes", "strong-forward-translation").
SceneSpec make_preset_scene(const std::string& name, std::uint64_t seed, double noise_sigma);

}  // namespace moseg
