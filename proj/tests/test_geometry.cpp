#include "doctest.h"

#include <numbers>
#include <random>

#include "radpose/errors.h"
#include "radpose/geometry.h"
#include "support.h"

using namespace radpose;
using testing_support::random_pose;

namespace {

CameraIntrinsics cam(double fx, double fy, double cx, double cy, int w = 640, int h = 480) {
    CameraIntrinsics k;
    k.fx = fx;
    k.fy = fy;
    k.cx = cx;
    k.cy = cy;
    k.width = w;
    k.height = h;
    return k;
}

// Written out element by element, independent of Eigen's AngleAxis.
Mat3 rz_ry_rx(double x, double y, double z) {
    Mat3 rx, ry, rz;
    rx << 1, 0, 0, 0, std::cos(x), -std::sin(x), 0, std::sin(x), std::cos(x);
    ry << std::cos(y), 0, std::sin(y), 0, 1, 0, -std::sin(y), 0, std::cos(y);
    rz << std::cos(z), -std::sin(z), 0, std::sin(z), std::cos(z), 0, 0, 0, 1;
    return rz * ry * rx;
}

bool vertex_set_invariant(const MeshModel& mesh, const Pose& s, double tol) {
    for (const auto& v : mesh.vertices) {
        const Vec3 w = apply(s, v);
        double best = 1e9;
        for (const auto& u : mesh.vertices) {
            best = std::min(best, (u - w).norm());
        }
        if (best > tol) {
            return false;
        }
    }
    return true;
}

}  // namespace

TEST_CASE("project follows the pinhole model") {
    const auto k = cam(100, 100, 50, 50);
    CHECK((project(Vec3(0, 0, 1), k) - Vec2(50, 50)).norm() < 1e-12);
    CHECK((project(Vec3(0.5, 0, 1), k) - Vec2(100, 50)).norm() < 1e-12);
    CHECK((project(Vec3(0.1, 0.2, 2), cam(500, 400, 320, 240)) - Vec2(345, 280)).norm() < 1e-12);
    CHECK_THROWS_AS(project(Vec3(0, 0, 0), k), DomainError);
    CHECK_THROWS_AS(project(Vec3(0, 0, -1), k), DomainError);
}

TEST_CASE("backproject inverts project") {
    const auto k = cam(100, 100, 50, 50);
    CHECK((backproject(Vec2(50, 50), 1.0, k) - Vec3(0, 0, 1)).norm() < 1e-12);
    CHECK((backproject(Vec2(100, 50), 1.0, k) - Vec3(0.5, 0, 1)).norm() < 1e-12);
    CHECK_THROWS_AS(backproject(Vec2(1, 1), 0.0, k), DomainError);

    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 640.0), v(0.0, 480.0), d(0.1, 10.0);
    const auto k2 = cam(525, 520, 319.5, 239.5);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const Vec2 p(u(rng), v(rng));
        worst = std::max(worst, (project(backproject(p, d(rng), k2), k2) - p).norm());
    }
    CHECK(worst < 1e-9);
}

TEST_CASE("intrinsics validation") {
    CHECK_NOTHROW(cam(100, 100, 50, 50).validate());
    CHECK_THROWS_AS(cam(0, 100, 50, 50).validate(), DomainError);
    CHECK_THROWS_AS(cam(100, 100, 640, 50).validate(), DomainError);
    CHECK_THROWS_AS(cam(100, 100, 50, -1).validate(), DomainError);
}

TEST_CASE("compose, invert and apply") {
    const Pose id = invert(Pose::identity());
    CHECK(id.rotation.isApprox(Mat3::Identity()));
    CHECK(id.translation.norm() == 0.0);

    Pose t;
    t.translation = Vec3(1, 2, 3);
    CHECK((apply(t, Vec3::Zero()) - Vec3(1, 2, 3)).norm() == 0.0);

    std::mt19937_64 rng(3);
    for (int i = 0; i < 200; ++i) {
        const Pose a = random_pose(rng, 1.0, 2.0);
        const Pose b = random_pose(rng, 1.0, 2.0);
        const Mat4 left = compose(a, invert(a)).matrix();
        const Mat4 right = compose(invert(a), a).matrix();
        CHECK((left - Mat4::Identity()).cwiseAbs().maxCoeff() < 1e-9);
        CHECK((right - Mat4::Identity()).cwiseAbs().maxCoeff() < 1e-9);
        CHECK((compose(a, b).matrix() - a.matrix() * b.matrix()).cwiseAbs().maxCoeff() < 1e-12);
        const Vec3 p = testing_support::random_vec(rng, -1, 1);
        const Vec3 q = testing_support::random_vec(rng, -1, 1);
        CHECK(std::abs((apply(a, p) - apply(a, q)).norm() - (p - q).norm()) < 1e-9);
        CHECK(a.is_valid());
    }
}

TEST_CASE("pose matrix round trip and validity") {
    std::mt19937_64 rng(5);
    const Pose a = random_pose(rng);
    const Pose b = Pose::from_matrix(a.matrix());
    CHECK(b.rotation == a.rotation);
    CHECK(b.translation == a.translation);
    Pose bad = a;
    bad.rotation(0, 0) += 1e-3;
    CHECK_FALSE(bad.is_valid());
    Pose mirror;
    mirror.rotation = Vec3(1, 1, -1).asDiagonal();
    CHECK_FALSE(mirror.is_valid());
}

TEST_CASE("axis-angle rotations compose as Rz Ry Rx") {
    CHECK(rotation_from_axis_angles(Vec3::Zero()).isApprox(Mat3::Identity()));
    const Mat3 half = rotation_from_axis_angles(Vec3(std::numbers::pi, 0, 0));
    CHECK((half - Mat3(Vec3(1, -1, -1).asDiagonal())).cwiseAbs().maxCoeff() < 1e-12);
    const double a = std::numbers::pi / 18.0;
    const Mat3 r = rotation_from_axis_angles(Vec3(a, -a, a));
    CHECK((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-12);

    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-std::numbers::pi, std::numbers::pi);
    std::uniform_real_distribution<double> half_range(-1.5, 1.5);
    for (int i = 0; i < 500; ++i) {
        const Vec3 ang(u(rng), half_range(rng), u(rng));
        const Mat3 m = rotation_from_axis_angles(ang);
        CHECK((m - rz_ry_rx(ang.x(), ang.y(), ang.z())).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((m.transpose() * m - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-9);
        CHECK((axis_angles_from_rotation(m) - ang).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("geodesic angle between rotations") {
    const Mat3 a = Eigen::AngleAxisd(0.3, Vec3::UnitZ()).toRotationMatrix();
    CHECK(rotation_angle_between(Mat3::Identity(), a) == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(rotation_angle_between(a, a) < 1e-12);
    const Mat3 b = Eigen::AngleAxisd(std::numbers::pi, Vec3(1, 1, 0).normalized()).toRotationMatrix();
    CHECK(rotation_angle_between(Mat3::Identity(), b) == doctest::Approx(std::numbers::pi).epsilon(1e-9));
}

TEST_CASE("mesh construction") {
    std::mt19937_64 rng(1);
    std::vector<Vec3> pts;
    for (int i = 0; i < 60; ++i) {
        pts.push_back(testing_support::random_vec(rng, -1, 1));
    }
    double brute = 0.0;
    for (const auto& p : pts) {
        for (const auto& q : pts) {
            brute = std::max(brute, (p - q).norm());
        }
    }
    const MeshModel m = make_mesh(pts, {{0, 1, 2}});
    CHECK(m.diameter == brute);
    REQUIRE(m.symmetries.size() == 1);
    CHECK(m.symmetries[0].rotation == Mat3::Identity());
    CHECK_THROWS_AS(make_mesh(pts, {{0, 1, 60}}), DomainError);
    CHECK_THROWS_AS(make_mesh({Vec3(0, 0, std::nan(""))}, {}), DomainError);
}

TEST_CASE("procedural meshes") {
    const MeshModel box = make_box(Vec3(0.09, 0.06, 0.04), 2);
    CHECK(box.diameter == doctest::Approx(Vec3(0.09, 0.06, 0.04).norm()).epsilon(1e-12));
    CHECK(box.symmetries.size() == 4);
    for (const auto& s : box.symmetries) {
        CHECK(vertex_set_invariant(box, s, 1e-12));
    }

    const MeshModel sphere = make_icosphere(0.2, 2);
    for (const auto& v : sphere.vertices) {
        CHECK(v.norm() == doctest::Approx(0.2).epsilon(1e-12));
    }
    CHECK(sphere.diameter == doctest::Approx(0.4).epsilon(1e-9));

    const MeshModel cyl = make_cylinder(0.03, 0.09, 16, 3);
    CHECK(cyl.symmetries.size() == 32);
    for (const auto& s : cyl.symmetries) {
        CHECK(s.is_valid());
        CHECK(vertex_set_invariant(cyl, s, 1e-12));
    }

    const MeshModel ell = make_ellipsoid(Vec3(0.06, 0.04, 0.03), 2);
    for (const auto& v : ell.vertices) {
        const double q = std::pow(v.x() / 0.06, 2) + std::pow(v.y() / 0.04, 2) + std::pow(v.z() / 0.03, 2);
        CHECK(q == doctest::Approx(1.0).epsilon(1e-9));
    }
    for (const auto& s : ell.symmetries) {
        CHECK(vertex_set_invariant(ell, s, 1e-12));
    }
}
