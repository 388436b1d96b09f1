#include "radpose/geometry.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <string>
#include <tuple>

#include <Eigen/SVD>

#include "radpose/errors.h"

namespace radpose {

Pose Pose::from_matrix(const Mat4& m) {
    Pose p;
    p.rotation = m.topLeftCorner<3, 3>();
    p.translation = m.topRightCorner<3, 1>();
    return p;
}

Mat4 Pose::matrix() const {
    Mat4 m = Mat4::Identity();
    m.topLeftCorner<3, 3>() = rotation;
    m.topRightCorner<3, 1>() = translation;
    return m;
}

bool Pose::is_valid(double tol) const {
    if (!rotation.allFinite() || !translation.allFinite()) {
        return false;
    }
    const Mat3 residual = rotation.transpose() * rotation - Mat3::Identity();
    return residual.cwiseAbs().maxCoeff() <= tol && std::abs(rotation.determinant() - 1.0) <= tol;
}

void CameraIntrinsics::validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) {
        throw DomainError("focal lengths must be positive");
    }
    if (width <= 0 || height <= 0) {
        throw DomainError("image size must be positive");
    }
    if (!(cx >= 0.0 && cx < width && cy >= 0.0 && cy < height)) {
        throw DomainError("principal point must lie inside the image");
    }
}

Vec3 MeshModel::centroid() const {
    Vec3 c = Vec3::Zero();
    for (const auto& v : vertices) {
        c += v;
    }
    return vertices.empty() ? c : Vec3(c / static_cast<double>(vertices.size()));
}

double max_pairwise_distance(const std::vector<Vec3>& points) {
    double best = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        for (std::size_t j = i + 1; j < points.size(); ++j) {
            best = std::max(best, (points[i] - points[j]).squaredNorm());
        }
    }
    return std::sqrt(best);
}

MeshModel make_mesh(std::vector<Vec3> vertices, std::vector<Face> faces, std::vector<Pose> symmetries) {
    const int n = static_cast<int>(vertices.size());
    for (const auto& f : faces) {
        for (int idx : f) {
            if (idx < 0 || idx >= n) {
                throw DomainError("face index " + std::to_string(idx) + " out of range");
            }
        }
    }
    for (const auto& v : vertices) {
        if (!v.allFinite()) {
            throw DomainError("mesh vertex is not finite");
        }
    }
    MeshModel mesh;
    mesh.diameter = max_pairwise_distance(vertices);
    mesh.vertices = std::move(vertices);
    mesh.faces = std::move(faces);
    mesh.symmetries.clear();
    const bool has_identity = std::any_of(symmetries.begin(), symmetries.end(), [](const Pose& s) {
        return s.rotation.isApprox(Mat3::Identity(), 1e-12) && s.translation.norm() < 1e-12;
    });
    if (!has_identity) {
        mesh.symmetries.push_back(Pose::identity());
    }
    for (auto& s : symmetries) {
        if (!s.is_valid(1e-6)) {
            throw DomainError("symmetry transform is not a rigid motion");
        }
        mesh.symmetries.push_back(std::move(s));
    }
    return mesh;
}

Vec2 project(const Vec3& point, const CameraIntrinsics& k) {
    if (!(point.z() > 0.0)) {
        throw DomainError("cannot project a point with non-positive depth");
    }
    return {k.fx * point.x() / point.z() + k.cx, k.fy * point.y() / point.z() + k.cy};
}

Vec3 backproject(const Vec2& pixel, double depth, const CameraIntrinsics& k) {
    if (!(depth > 0.0)) {
        throw DomainError("cannot backproject with non-positive depth");
    }
    return {(pixel.x() - k.cx) / k.fx * depth, (pixel.y() - k.cy) / k.fy * depth, depth};
}

Pose compose(const Pose& a, const Pose& b) {
    Pose out;
    out.rotation = a.rotation * b.rotation;
    out.translation = a.rotation * b.translation + a.translation;
    return out;
}

Pose invert(const Pose& a) {
    Pose out;
    out.rotation = a.rotation.transpose();
    out.translation = -(out.rotation * a.translation);
    return out;
}

Vec3 apply(const Pose& a, const Vec3& p) { return a.rotation * p + a.translation; }

Mat3 rotation_from_axis_angles(const Vec3& angles) {
    const Mat3 rx = Eigen::AngleAxisd(angles.x(), Vec3::UnitX()).toRotationMatrix();
    const Mat3 ry = Eigen::AngleAxisd(angles.y(), Vec3::UnitY()).toRotationMatrix();
    const Mat3 rz = Eigen::AngleAxisd(angles.z(), Vec3::UnitZ()).toRotationMatrix();
    return rz * ry * rx;
}

Vec3 axis_angles_from_rotation(const Mat3& r) {
    // R = Rz(c) Ry(b) Rx(a): R(2,0) = -sin b, R(2,1) = cos b sin a, R(2,2) = cos b cos a,
    // R(1,0) = sin c cos b, R(0,0) = cos c cos b.
    const double b = std::asin(std::clamp(-r(2, 0), -1.0, 1.0));
    const double a = std::atan2(r(2, 1), r(2, 2));
    const double c = std::atan2(r(1, 0), r(0, 0));
    return {a, b, c};
}

double rotation_angle_between(const Mat3& a, const Mat3& b) {
    const Mat3 rel = a.transpose() * b;
    // atan2 form stays accurate for both tiny and near-pi angles.
    const Vec3 axis(rel(2, 1) - rel(1, 2), rel(0, 2) - rel(2, 0), rel(1, 0) - rel(0, 1));
    const double s = 0.5 * axis.norm();
    const double c = 0.5 * (rel.trace() - 1.0);
    return std::atan2(s, c);
}

namespace {

// Flip faces of a star-shaped closed mesh so normals point away from its center.
void orient_outward(const std::vector<Vec3>& v, std::vector<Face>& faces, const Vec3& center) {
    for (auto& f : faces) {
        const Vec3 n = (v[f[1]] - v[f[0]]).cross(v[f[2]] - v[f[0]]);
        const Vec3 mid = (v[f[0]] + v[f[1]] + v[f[2]]) / 3.0;
        if (n.dot(mid - center) < 0.0) {
            std::swap(f[1], f[2]);
        }
    }
}

Pose half_turn(const Vec3& axis) {
    Pose p;
    p.rotation = Eigen::AngleAxisd(std::numbers::pi, axis).toRotationMatrix();
    return p;
}

std::vector<Pose> box_symmetries() {
    return {half_turn(Vec3::UnitX()), half_turn(Vec3::UnitY()), half_turn(Vec3::UnitZ())};
}

}  // namespace

MeshModel make_box(const Vec3& size, int subdivisions) {
    if ((size.array() <= 0.0).any() || subdivisions < 0) {
        throw DomainError("box size must be positive and subdivisions non-negative");
    }
    const int n = subdivisions + 1;
    std::map<std::tuple<int, int, int>, int> index_of;
    std::vector<Vec3> vertices;
    std::vector<Face> faces;

    auto vertex = [&](const std::array<int, 3>& lattice) {
        const auto key = std::make_tuple(lattice[0], lattice[1], lattice[2]);
        auto it = index_of.find(key);
        if (it != index_of.end()) {
            return it->second;
        }
        Vec3 p;
        for (int a = 0; a < 3; ++a) {
            p[a] = (static_cast<double>(lattice[a]) / n - 0.5) * size[a];
        }
        vertices.push_back(p);
        const int id = static_cast<int>(vertices.size()) - 1;
        index_of.emplace(key, id);
        return id;
    };

    for (int axis = 0; axis < 3; ++axis) {
        const int b = (axis + 1) % 3;
        const int c = (axis + 2) % 3;
        for (int side : {0, n}) {
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < n; ++j) {
                    std::array<int, 3> l00{}, l10{}, l11{}, l01{};
                    for (auto* l : {&l00, &l10, &l11, &l01}) {
                        (*l)[axis] = side;
                    }
                    l00[b] = i, l00[c] = j;
                    l10[b] = i + 1, l10[c] = j;
                    l11[b] = i + 1, l11[c] = j + 1;
                    l01[b] = i, l01[c] = j + 1;
                    const int v00 = vertex(l00), v10 = vertex(l10), v11 = vertex(l11), v01 = vertex(l01);
                    faces.push_back({v00, v10, v11});
                    faces.push_back({v00, v11, v01});
                }
            }
        }
    }
    orient_outward(vertices, faces, Vec3::Zero());
    return make_mesh(std::move(vertices), std::move(faces), box_symmetries());
}

MeshModel make_icosphere(double radius, int subdivisions) {
    if (!(radius > 0.0) || subdivisions < 0) {
        throw DomainError("icosphere radius must be positive and subdivisions non-negative");
    }
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vec3> v = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                           {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
    for (auto& p : v) {
        p.normalize();
    }
    std::vector<Face> faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                               {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                               {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                               {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
    for (int level = 0; level < subdivisions; ++level) {
        std::map<std::pair<int, int>, int> midpoint;
        auto mid = [&](int a, int b) {
            const auto key = std::minmax(a, b);
            auto it = midpoint.find(key);
            if (it != midpoint.end()) {
                return it->second;
            }
            v.push_back((v[a] + v[b]).normalized());
            const int id = static_cast<int>(v.size()) - 1;
            midpoint.emplace(key, id);
            return id;
        };
        std::vector<Face> next;
        next.reserve(faces.size() * 4);
        for (const auto& f : faces) {
            const int ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
            next.push_back({f[0], ab, ca});
            next.push_back({f[1], bc, ab});
            next.push_back({f[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        faces = std::move(next);
    }
    for (auto& p : v) {
        p *= radius;
    }
    orient_outward(v, faces, Vec3::Zero());
    return make_mesh(std::move(v), std::move(faces), box_symmetries());
}

MeshModel make_ellipsoid(const Vec3& radii, int subdivisions) {
    if ((radii.array() <= 0.0).any()) {
        throw DomainError("ellipsoid radii must be positive");
    }
    MeshModel unit = make_icosphere(1.0, subdivisions);
    for (auto& p : unit.vertices) {
        p = p.cwiseProduct(radii);
    }
    return make_mesh(std::move(unit.vertices), std::move(unit.faces), box_symmetries());
}

MeshModel make_cylinder(double radius, double height, int segments, int rings) {
    if (!(radius > 0.0) || !(height > 0.0) || segments < 3 || rings < 1) {
        throw DomainError("invalid cylinder parameters");
    }
    std::vector<Vec3> v;
    std::vector<Face> faces;
    for (int r = 0; r <= rings; ++r) {
        const double z = -0.5 * height + height * r / rings;
        for (int s = 0; s < segments; ++s) {
            const double a = 2.0 * std::numbers::pi * s / segments;
            v.emplace_back(radius * std::cos(a), radius * std::sin(a), z);
        }
    }
    auto ring_vertex = [&](int r, int s) { return r * segments + (s % segments); };
    for (int r = 0; r < rings; ++r) {
        for (int s = 0; s < segments; ++s) {
            faces.push_back({ring_vertex(r, s), ring_vertex(r, s + 1), ring_vertex(r + 1, s + 1)});
            faces.push_back({ring_vertex(r, s), ring_vertex(r + 1, s + 1), ring_vertex(r + 1, s)});
        }
    }
    const int bottom = static_cast<int>(v.size());
    v.emplace_back(0.0, 0.0, -0.5 * height);
    const int top = static_cast<int>(v.size());
    v.emplace_back(0.0, 0.0, 0.5 * height);
    for (int s = 0; s < segments; ++s) {
        faces.push_back({bottom, ring_vertex(0, s + 1), ring_vertex(0, s)});
        faces.push_back({top, ring_vertex(rings, s), ring_vertex(rings, s + 1)});
    }
    orient_outward(v, faces, Vec3::Zero());

    std::vector<Pose> symmetries;
    const Pose flip = half_turn(Vec3::UnitX());
    for (int s = 0; s < segments; ++s) {
        Pose spin;
        spin.rotation = Eigen::AngleAxisd(2.0 * std::numbers::pi * s / segments, Vec3::UnitZ()).toRotationMatrix();
        if (s > 0) {
            symmetries.push_back(spin);
        }
        symmetries.push_back(compose(spin, flip));
    }
    return make_mesh(std::move(v), std::move(faces), std::move(symmetries));
}

}  // namespace radpose
