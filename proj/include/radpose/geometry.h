#pragma once

#include <array>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace radpose {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

/// Rigid transform mapping model-frame points into the camera frame:
/// x_cam = rotation * x_model + translation. Lengths are in meters.
struct Pose {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    static Pose identity() { return {}; }
    static Pose from_matrix(const Mat4& m);
    Mat4 matrix() const;

    /// Orthonormality and det(R) = +1 within `tol` per element.
    bool is_valid(double tol = 1e-9) const;
};

/// Pinhole intrinsics. Camera frame is +z forward, +x right, +y down and
/// integer pixel coordinates address pixel centers.
struct CameraIntrinsics {
    double fx = 0.0;
    double fy = 0.0;
    double cx = 0.0;
    double cy = 0.0;
    int width = 0;
    int height = 0;

    /// Throws DomainError unless fx, fy > 0 and the principal point lies
    /// inside the image.
    void validate() const;
};

using Face = std::array<int, 3>;

/// Triangle mesh in the model frame. `symmetries` always contains the
/// identity; `diameter` is the maximum pairwise vertex distance.
struct MeshModel {
    std::vector<Vec3> vertices;
    std::vector<Face> faces;
    double diameter = 0.0;
    std::vector<Pose> symmetries{Pose::identity()};

    bool empty() const { return vertices.empty(); }
    Vec3 centroid() const;
};

/// Builds a mesh and recomputes its diameter by brute force. The identity is
/// prepended to `symmetries` when absent. Face indices are range checked.
MeshModel make_mesh(std::vector<Vec3> vertices, std::vector<Face> faces,
                    std::vector<Pose> symmetries = {});

double max_pairwise_distance(const std::vector<Vec3>& points);

Vec2 project(const Vec3& point, const CameraIntrinsics& k);
Vec3 backproject(const Vec2& pixel, double depth, const CameraIntrinsics& k);

/// a ∘ b: apply b first, then a.
Pose compose(const Pose& a, const Pose& b);
Pose invert(const Pose& a);
Vec3 apply(const Pose& a, const Vec3& p);

/// Rz(angles.z) * Ry(angles.y) * Rx(angles.x).
Mat3 rotation_from_axis_angles(const Vec3& angles);

/// Inverse of rotation_from_axis_angles on its principal branch
/// (|y| <= pi/2). Returns (x, y, z).
Vec3 axis_angles_from_rotation(const Mat3& r);

/// Geodesic angle between two rotations, radians in [0, pi].
double rotation_angle_between(const Mat3& a, const Mat3& b);

// Procedural meshes used for desk-scale scenes.
MeshModel make_box(const Vec3& size, int subdivisions = 0);
MeshModel make_icosphere(double radius, int subdivisions);
MeshModel make_ellipsoid(const Vec3& radii, int subdivisions);
/// Closed cylinder along z. Symmetries are the `segments` discrete rotations
/// about z composed with the half-turn flip about x.
MeshModel make_cylinder(double radius, double height, int segments, int rings = 1);

}  // namespace radpose
