#pragma once

#include <tuple>
#include <vector>

#include "radpose/geometry.h"
#include "radpose/image.h"

namespace radpose {

/// 2D-3D correspondences. Weights in [0, 1] scale each point's rows in the
/// ePnP system; zero-weight points are ignored.
struct Correspondences {
    std::vector<Vec3> model_pts;
    std::vector<Vec2> image_pts;
    std::vector<double> weights;

    /// Unit weights for every point.
    static Correspondences unweighted(std::vector<Vec3> model, std::vector<Vec2> image);
    /// Throws DomainError on size mismatch, n < 4, non-finite values or
    /// weights outside [0, 1].
    void validate() const;
};

struct PnpResult {
    Pose pose;
    /// Weighted reprojection RMSE over the input points, pixels.
    double reprojection_rmse = 0.0;
    /// Null-space dimension of the winning candidate.
    int null_dim = 0;
};

/// ePnP with four control points (centroid plus principal axes of the model
/// points). Coplanar models switch to three control points. Each null-space
/// candidate (N = 1..4) is refined by Gauss-Newton on the control-point
/// distance constraints and finished with Horn alignment; the lowest
/// reprojection RMSE wins. Throws DegeneracyError for collinear models.
PnpResult epnp(const Correspondences& c, const CameraIntrinsics& k);

/// Weighted absolute orientation: argmin over (R, t) of
/// sum_i w_i |R src_i + t - dst_i|^2, via SVD of the weighted cross-covariance
/// with determinant correction. Empty weights mean unit weights. Throws
/// DegeneracyError when src is collinear or n < 3.
Pose horn_align(const std::vector<Vec3>& src, const std::vector<Vec3>& dst, const std::vector<double>& weights = {});

double alignment_objective(const Pose& pose, const std::vector<Vec3>& src, const std::vector<Vec3>& dst,
                           const std::vector<double>& weights = {});

struct IcpOptions {
    int max_iters = 30;
    /// Stop when both the rotation change (rad) and translation change (m)
    /// of an update fall below this value.
    double tol = 1e-7;
    int min_points = 100;
    /// Spatial hash cell for closest-point queries, meters.
    double cell_size = 0.01;
    /// Anderson acceleration history length over the pose parameters; the
    /// accelerated pose replaces the plain Horn update only when it lowers
    /// the objective. 0 disables acceleration.
    int anderson_depth = 5;
};

struct IcpResult {
    Pose pose;
    bool skipped = false;
    int iterations = 0;
    double initial_objective = 0.0;
    double final_objective = 0.0;
    /// Objective (mean squared closest-surface distance) before each update
    /// and after the last one.
    std::vector<double> objective_trace;
};

/// Point-to-point ICP between the back-projected masked depth and the mesh
/// surface placed at the current pose. Pairs are scene point to closest point
/// on the posed mesh; every iteration solves horn_align. Fewer than
/// `min_points` foreground pixels returns pose0 with `skipped` set. The
/// objective never increases between iterations.
IcpResult icp_refine(const Pose& pose0, const MeshModel& mesh, const DepthMap& depth, const InstanceMask& mask,
                     const CameraIntrinsics& k, const IcpOptions& options = {});

/// Closest point to p on triangle (a, b, c).
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

/// Closest-point queries against a mesh surface in its model frame.
class SurfaceIndex {
public:
    SurfaceIndex(const MeshModel& mesh, double cell_size);
    /// Closest surface point to `p` (model frame).
    Vec3 closest(const Vec3& p) const;
    /// Reference implementation that scans every triangle.
    Vec3 closest_brute_force(const Vec3& p) const;

private:
    struct Key {
        int x, y, z;
        bool operator<(const Key& o) const { return std::tie(x, y, z) < std::tie(o.x, o.y, o.z); }
    };
    Key key_of(const Vec3& p) const;

    const MeshModel* mesh_;
    double cell_;
    Vec3 lo_, hi_;
    std::vector<std::pair<Key, int>> cells_;  // sorted (cell, face)
};

}  // namespace radpose
