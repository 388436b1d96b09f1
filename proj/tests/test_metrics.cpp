#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>

#include "radpose/errors.h"
#include "radpose/metrics.h"
#include "radpose/synth.h"
#include "support.h"

using namespace radpose;
using testing_support::random_pose;

namespace {

MeshModel random_mesh(std::mt19937_64& rng, int n) {
    std::vector<Vec3> v;
    for (int i = 0; i < n; ++i) {
        v.push_back(testing_support::random_vec(rng, -0.05, 0.05));
    }
    return make_mesh(v, {});
}

Vec3 tf(const Pose& p, const Vec3& v) {
    Vec3 out;
    for (int r = 0; r < 3; ++r) {
        out(r) = p.rotation(r, 0) * v(0) + p.rotation(r, 1) * v(1) + p.rotation(r, 2) * v(2) + p.translation(r);
    }
    return out;
}

double add_oracle(const MeshModel& m, const Pose& g, const Pose& e) {
    double s = 0.0;
    for (const auto& v : m.vertices) {
        s += (tf(g, v) - tf(e, v)).norm();
    }
    return s / static_cast<double>(m.vertices.size());
}

double adds_oracle(const MeshModel& m, const Pose& g, const Pose& e) {
    double s = 0.0;
    for (const auto& a : m.vertices) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& b : m.vertices) {
            best = std::min(best, (tf(g, a) - tf(e, b)).norm());
        }
        s += best;
    }
    return s / static_cast<double>(m.vertices.size());
}

double mssd_oracle(const MeshModel& m, const Pose& g, const Pose& e) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& sym : m.symmetries) {
        double worst = 0.0;
        for (const auto& v : m.vertices) {
            worst = std::max(worst, (tf(e, v) - tf(g, tf(sym, v))).norm());
        }
        best = std::min(best, worst);
    }
    return best;
}

Vec2 proj(const Vec3& p, const CameraIntrinsics& k) { return {k.fx * p.x() / p.z() + k.cx, k.fy * p.y() / p.z() + k.cy}; }

double mspd_oracle(const MeshModel& m, const Pose& g, const Pose& e, const CameraIntrinsics& k) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& sym : m.symmetries) {
        double worst = 0.0;
        for (const auto& v : m.vertices) {
            worst = std::max(worst, (proj(tf(e, v), k) - proj(tf(g, tf(sym, v)), k)).norm());
        }
        best = std::min(best, worst);
    }
    return best;
}

double vsd_oracle(const DepthMap& a, const DepthMap& b, const DepthMap& scene, double tau, double delta) {
    int uni = 0, bad = 0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const bool va = a.data[i] > 0 && std::abs(a.data[i] - scene.data[i]) < delta;
        const bool vb = b.data[i] > 0 && std::abs(b.data[i] - scene.data[i]) < delta;
        if (va || vb) {
            ++uni;
            if (!(va && vb) || std::abs(a.data[i] - b.data[i]) > tau) {
                ++bad;
            }
        }
    }
    return uni == 0 ? 0.0 : static_cast<double>(bad) / uni;
}

CameraIntrinsics vga() {
    CameraIntrinsics k;
    k.fx = k.fy = 500;
    k.cx = 319.5;
    k.cy = 239.5;
    k.width = 640;
    k.height = 480;
    return k;
}

}  // namespace

TEST_CASE("add examples and oracle") {
    std::mt19937_64 rng(1);
    const MeshModel m = random_mesh(rng, 200);
    const Pose p = random_pose(rng);
    CHECK(add(m, p, p) == 0.0);
    Pose shifted = p;
    shifted.translation.x() += 0.01;
    CHECK(add(m, p, shifted) == doctest::Approx(0.01).epsilon(1e-12));
    for (int i = 0; i < 20; ++i) {
        const Pose a = random_pose(rng), b = random_pose(rng);
        CHECK(std::abs(add(m, a, b) - add_oracle(m, a, b)) < 1e-12);
        CHECK(std::abs(add_s(m, a, b) - adds_oracle(m, a, b)) < 1e-12);
    }
}

TEST_CASE("add_s never exceeds add") {
    std::mt19937_64 rng(2);
    const MeshModel m = random_mesh(rng, 100);
    for (int i = 0; i < 100; ++i) {
        const Pose a = random_pose(rng), b = random_pose(rng);
        CHECK(add_s(m, a, b) <= add(m, a, b));
    }
    const Pose p = random_pose(rng);
    CHECK(add_s(m, p, p) == 0.0);
}

TEST_CASE("add_s absorbs a rotation about a cylinder axis") {
    const MeshModel cyl = make_cylinder(0.03, 0.08, 48, 4);
    std::mt19937_64 rng(3);
    const Pose gt = random_pose(rng);
    Pose est = gt;
    est.rotation = gt.rotation * Eigen::AngleAxisd(0.37, Vec3::UnitZ()).toRotationMatrix();
    CHECK(add_s(cyl, gt, est) < 2e-3);
    CHECK(add(cyl, gt, est) > 5e-3);
}

TEST_CASE("threshold accuracy") {
    CHECK(add_threshold_accuracy({{0, 0, 1, false}, {0, 0, 1, true}}) == 1.0);
    CHECK(add_threshold_accuracy({{1, 1, 1, false}, {1, 1, 1, true}}) == 0.0);
    CHECK(add_threshold_accuracy({{0.05, 0.05, 1, false}, {0.2, 0.2, 1, false}}) == 0.5);
    // Symmetric entries are judged by add_s.
    CHECK(add_threshold_accuracy({{0.5, 0.01, 1, true}}) == 1.0);
    CHECK(add_threshold_accuracy({{0.5, 0.01, 1, false}}) == 0.0);
    CHECK_THROWS_AS(add_threshold_accuracy({{0, 0, 1, false}}, 0.0), DomainError);
}

TEST_CASE("auc examples") {
    CHECK(add_s_auc({0.0, 0.0, 0.0}, 0.1) == 1.0);
    CHECK(add_s_auc({0.2, 0.5}, 0.1) == 0.0);
    CHECK(add_s_auc({0.05}, 0.1) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK_THROWS_AS(add_s_auc({}, 0.1), DomainError);
    CHECK_THROWS_AS(add_s_auc({0.1}, 0.0), DomainError);

    // Riemann sum of the accuracy curve converges to the exact area.
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 0.15);
    std::vector<double> errs;
    for (int i = 0; i < 50; ++i) {
        errs.push_back(u(rng));
    }
    const auto curve = accuracy_curve(errs, 0.1, 100000);
    double area = 0.0;
    for (std::size_t i = 1; i < curve.size(); ++i) {
        area += curve[i].second * (curve[i].first - curve[i - 1].first);
    }
    CHECK(std::abs(area / 0.1 - add_s_auc(errs, 0.1)) < 1e-3);

    double prev = 0.0;
    for (double t = 0.01; t <= 0.3; t += 0.01) {
        const double a = add_s_auc(errs, t);
        CHECK(a >= prev - 1e-15);
        prev = a;
    }
}

TEST_CASE("mssd and mspd match oracles") {
    std::mt19937_64 rng(5);
    const auto k = vga();
    const MeshModel m = random_mesh(rng, 150);
    const MeshModel box = make_box(Vec3(0.06, 0.04, 0.03), 2);
    for (int i = 0; i < 20; ++i) {
        const Pose a = random_pose(rng), b = random_pose(rng);
        CHECK(std::abs(mssd(m, a, b) - mssd_oracle(m, a, b)) < 1e-12);
        CHECK(std::abs(mspd(m, a, b, k) - mspd_oracle(m, a, b, k)) < 1e-12);
        CHECK(std::abs(mssd(box, a, b) - mssd_oracle(box, a, b)) < 1e-12);
        CHECK(std::abs(mspd(box, a, b, k) - mspd_oracle(box, a, b, k)) < 1e-12);
    }
    const Pose p = random_pose(rng);
    CHECK(mssd(m, p, p) == 0.0);
    CHECK(mspd(m, p, p, k) == 0.0);
}

TEST_CASE("mssd and mspd are symmetry invariant") {
    std::mt19937_64 rng(6);
    const auto k = vga();
    const MeshModel box = make_box(Vec3(0.06, 0.04, 0.03), 2);
    const MeshModel cyl = make_cylinder(0.03, 0.08, 12, 2);
    for (const MeshModel* m : {&box, &cyl}) {
        for (int i = 0; i < 10; ++i) {
            const Pose gt = random_pose(rng), est = random_pose(rng);
            for (const auto& s : m->symmetries) {
                const Pose gs = compose(gt, s);
                CHECK(std::abs(mssd(*m, gs, est) - mssd(*m, gt, est)) < 1e-9);
                CHECK(std::abs(mspd(*m, gs, est, k) - mspd(*m, gt, est, k)) < 1e-9);
                CHECK(mssd(*m, gt, gs) < 1e-9);
            }
        }
    }
}

TEST_CASE("vsd cases") {
    const auto k = vga();
    const MeshModel cube = make_box(Vec3(0.1, 0.1, 0.1), 1);
    Pose a;
    a.translation = Vec3(0, 0, 0.6);
    Pose b = a;
    b.translation.x() += 0.05;
    const DepthMap ra = render_depth(cube, a, k).depth;
    const DepthMap rb = render_depth(cube, b, k).depth;

    const VsdResult same = vsd(ra, ra, ra, 0.02);
    CHECK(same.value == 0.0);
    CHECK_FALSE(same.empty_union);

    Pose far = a;
    far.translation.x() += 0.3;
    const DepthMap rf = render_depth(cube, far, k).depth;
    DepthMap scene = ra;
    for (std::size_t i = 0; i < scene.size(); ++i) {
        scene.data[i] = std::max(scene.data[i], rf.data[i]);
    }
    CHECK(vsd(ra, rf, scene, 0.02).value == 1.0);

    DepthMap both = ra;
    for (std::size_t i = 0; i < both.size(); ++i) {
        if (rb.data[i] > 0 && (both.data[i] == 0 || rb.data[i] < both.data[i])) {
            both.data[i] = rb.data[i];
        }
    }
    for (double tau : {0.005, 0.02, 0.1}) {
        for (const DepthMap* s : std::vector<const DepthMap*>{&ra, &rb, &both}) {
            CHECK(std::abs(vsd(ra, rb, *s, tau).value - vsd_oracle(ra, rb, *s, tau, 0.015)) < 1e-12);
        }
    }
    const DepthMap empty(k.width, k.height, 0.0f);
    const VsdResult e = vsd(empty, empty, empty, 0.02);
    CHECK(e.empty_union);
    CHECK(e.value == 0.0);
}

TEST_CASE("ar recall") {
    ArEntry perfect;
    perfect.diameter = 0.1;
    const ArReport p = ar_recall({perfect, perfect});
    CHECK(p.ar_vsd == 1.0);
    CHECK(p.ar_mssd == 1.0);
    CHECK(p.ar_mspd == 1.0);
    CHECK(p.ar == 1.0);

    ArEntry failed;
    failed.diameter = 0.1;
    failed.vsd.fill(1.0);
    failed.mssd = 10.0;
    failed.mspd = 1e4;
    const ArReport f = ar_recall({failed});
    CHECK(f.ar == 0.0);

    std::vector<ArEntry> mix;
    for (int i = 0; i < 10; ++i) {
        ArEntry e = perfect;
        if (i >= 6) {
            e.mssd = 10.0;
        }
        mix.push_back(e);
    }
    const ArReport r = ar_recall(mix);
    CHECK(r.ar_mssd == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(r.ar_vsd == 1.0);
    CHECK(r.ar == doctest::Approx((1.0 + 0.6 + 1.0) / 3.0).epsilon(1e-15));
    CHECK_THROWS_AS(ar_recall({}), DomainError);

    // MSPD thresholds scale with the image width.
    ArEntry wide = perfect;
    wide.mspd = 6.0;
    wide.image_width = 640;
    const double r640 = ar_recall({wide}).ar_mspd;
    wide.image_width = 320;
    const double r320 = ar_recall({wide}).ar_mspd;
    CHECK(r640 == doctest::Approx(0.9));
    CHECK(r320 == doctest::Approx(0.8));
}

TEST_CASE("evaluate_pose bundles the metrics") {
    const auto k = desk_camera();
    const auto obj = desk_objects(4, 0)[1];
    const Scene s = generate_scene({obj}, 7, k, PlacementBox{});
    const Pose gt = s.labels.instances[0].pose;
    const PoseMetrics same = evaluate_pose(obj.mesh, gt, gt, k, &s.depth);
    CHECK(same.add == 0.0);
    CHECK(same.mssd == 0.0);
    CHECK(same.vsd == 0.0);
    CHECK(ar_recall({same.ar}).ar == 1.0);

    Pose off = gt;
    off.translation.x() += 0.01;
    const PoseMetrics m = evaluate_pose(obj.mesh, gt, off, k, &s.depth);
    CHECK(m.add == doctest::Approx(0.01).epsilon(1e-9));
    CHECK(m.add_s <= m.add);
    CHECK(m.vsd > 0.0);
    CHECK(m.vsd <= 1.0);
    CHECK(m.ar.diameter == obj.mesh.diameter);
}
