#pragma once

#include <cstdint>
#include <vector>

#include "radpose/geometry.h"
#include "radpose/image.h"

namespace radpose {

struct RenderResult {
    DepthMap depth;
    InstanceMask mask;
};

/// Per-keypoint rasters of camera-frame Euclidean distance from each
/// back-projected foreground pixel to the keypoint; background is -1.
struct RadialMapStack {
    std::vector<Image<float>> maps;

    std::size_t size() const { return maps.size(); }
    bool operator==(const RadialMapStack&) const = default;
};

inline constexpr float kRadialBackground = -1.0f;

/// A mesh with its keypoints (model frame) and class id (>= 1).
struct ObjectModel {
    MeshModel mesh;
    std::vector<Vec3> keypoints;
    int class_id = 1;
};

struct InstanceLabel {
    int instance_id = 0;
    int class_id = 0;
    Pose pose;
    std::vector<Vec3> keypoints3d;
    std::vector<Vec2> keypoints2d;
};

struct LabelSet {
    std::vector<InstanceLabel> instances;
    InstanceMask mask;

    const InstanceLabel* find(int instance_id) const;
};

/// Axis-aligned range of camera-frame object translations (meters).
struct PlacementBox {
    Vec3 min{-0.03, -0.03, 0.25};
    Vec3 max{0.03, 0.03, 0.35};
};

struct Scene {
    DepthMap depth;
    LabelSet labels;
    RadialMapStack radial;
};

/// Z-buffer rasterization sampled at pixel centers. Mask is 1 where any
/// triangle covers the pixel center. Throws DomainError if any transformed
/// vertex has z <= 0.
RenderResult render_depth(const MeshModel& mesh, const Pose& pose, const CameraIntrinsics& k);

/// Rasterizes into an existing buffer; nearer surfaces win and write
/// `instance_id` into the mask.
void render_into(RenderResult& target, const MeshModel& mesh, const Pose& pose, const CameraIntrinsics& k,
                 int instance_id);

RenderResult empty_render(const CameraIntrinsics& k);

/// Farthest-point sampling over mesh vertices, seeded from the vertex
/// farthest from the centroid. `seed` only breaks exact ties.
std::vector<Vec3> select_keypoints_fps(const MeshModel& mesh, int n, std::uint64_t seed);

/// Radial maps of a single object: every pixel with mask > 0 is foreground.
RadialMapStack make_radial_maps(const DepthMap& depth, const InstanceMask& mask, const Pose& pose,
                                const std::vector<Vec3>& keypoints3d, const CameraIntrinsics& k);

/// Radial maps of a labeled scene: each pixel measures against the keypoints
/// of the instance its mask id refers to. All instances share the keypoint
/// count.
RadialMapStack make_radial_maps(const DepthMap& depth, const LabelSet& labels, const CameraIntrinsics& k);

struct SceneOptions {
    int max_retries = 1000;
    /// Minimum margin (pixels) between any projected vertex and the border.
    double border_margin = 1.0;
};

/// Places every object once with a uniformly random rotation and a translation
/// drawn from `box`, rejecting placements whose bounding spheres intersect or
/// whose projection leaves the image. Deterministic in `seed`. Throws
/// CapacityError when an object cannot be placed within the retry budget.
Scene generate_scene(const std::vector<ObjectModel>& objects, std::uint64_t seed, const CameraIntrinsics& k,
                     const PlacementBox& box, const SceneOptions& options = {});

/// Bounding sphere (center, radius) of the mesh about its vertex centroid.
std::pair<Vec3, double> bounding_sphere(const MeshModel& mesh);

/// Foreground depth rescaled by its own min/max into [0, 1]; background 0.
Image<float> normalize_depth(const DepthMap& depth);
/// Pixel keypoints divided by image width and height.
std::vector<Vec2> normalize_keypoints(const std::vector<Vec2>& keypoints2d, const CameraIntrinsics& k);

/// Desk-scale intrinsics used by the tools and tests (160x120, f = 120 px).
CameraIntrinsics desk_camera();

/// Built-in object set (an ellipsoid, a box and a cylinder, roughly 8 to 12 cm
/// across) with FPS keypoints. Class ids are 1..3.
std::vector<ObjectModel> desk_objects(int num_keypoints = 4, std::uint64_t seed = 0);

}  // namespace radpose
