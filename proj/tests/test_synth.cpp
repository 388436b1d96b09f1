#include "doctest.h"

#include <algorithm>
#include <random>

#include "radpose/errors.h"
#include "radpose/synth.h"
#include "support.h"

using namespace radpose;

namespace {

CameraIntrinsics square_camera(double f, int size) {
    CameraIntrinsics k;
    k.fx = k.fy = f;
    k.cx = k.cy = (size - 1) / 2.0;
    k.width = k.height = size;
    return k;
}

// Per-pixel recomputation of every radial value.
double radial_oracle_error(const Scene& s, const CameraIntrinsics& k) {
    double worst = 0.0;
    for (std::size_t j = 0; j < s.radial.size(); ++j) {
        const auto& map = s.radial.maps[j];
        for (int v = 0; v < k.height; ++v) {
            for (int u = 0; u < k.width; ++u) {
                const int id = s.labels.mask.at(u, v);
                const float value = map.at(u, v);
                if (id == 0) {
                    if (value != -1.0f) {
                        return 1e9;
                    }
                    continue;
                }
                const InstanceLabel* inst = s.labels.find(id);
                const Vec3 kp = inst->pose.rotation * inst->keypoints3d[j] + inst->pose.translation;
                const double z = s.depth.at(u, v);
                const Vec3 p((u - k.cx) * z / k.fx, (v - k.cy) * z / k.fy, z);
                worst = std::max(worst, std::abs((p - kp).norm() - value));
            }
        }
    }
    return worst;
}

}  // namespace

TEST_CASE("render_depth of an axis-aligned cube") {
    const MeshModel cube = make_box(Vec3(1, 1, 1), 1);
    Pose pose;
    pose.translation = Vec3(0, 0, 3);
    const auto k = square_camera(200, 201);
    const RenderResult r = render_depth(cube, pose, k);
    CHECK(r.depth.at(100, 100) == doctest::Approx(2.5).epsilon(1e-6));
    CHECK(r.mask.at(100, 100) == 1);
    CHECK(r.mask.at(0, 0) == 0);
    CHECK(r.depth.at(0, 0) == 0.0f);

    // The front face spans 200 * 0.5 / 2.5 = 40 px to each side of center.
    CHECK(r.mask.at(100 + 39, 100) == 1);
    CHECK(r.mask.at(100 + 41, 100) == 0);
}

TEST_CASE("render_depth edge cases") {
    const auto k = square_camera(200, 64);
    const RenderResult e = empty_render(k);
    CHECK(std::all_of(e.depth.data.begin(), e.depth.data.end(), [](float d) { return d == 0.0f; }));
    CHECK(std::all_of(e.mask.data.begin(), e.mask.data.end(), [](int m) { return m == 0; }));

    Pose behind;
    behind.translation = Vec3(0, 0, -2);
    CHECK_THROWS_AS(render_depth(make_box(Vec3(1, 1, 1)), behind, k), DomainError);
}

TEST_CASE("icosphere front point") {
    const MeshModel sphere = make_icosphere(0.2, 3);
    Pose pose;
    pose.translation = Vec3(0, 0, 2);
    const auto k = square_camera(200, 101);
    const RenderResult r = render_depth(sphere, pose, k);
    float min_depth = 1e9f;
    for (std::size_t i = 0; i < r.depth.size(); ++i) {
        if (r.mask.data[i] > 0) {
            min_depth = std::min(min_depth, r.depth.data[i]);
        }
    }
    CHECK(std::abs(min_depth - 1.8) < 2e-3);
}

TEST_CASE("farthest point sampling") {
    const MeshModel cube = make_box(Vec3(1, 1, 1), 2);
    const auto one = select_keypoints_fps(cube, 1, 0);
    REQUIRE(one.size() == 1);
    CHECK(one[0].cwiseAbs().isApprox(Vec3(0.5, 0.5, 0.5)));

    const auto two = select_keypoints_fps(cube, 2, 0);
    CHECK((two[0] - two[1]).norm() == doctest::Approx(std::sqrt(3.0)));

    const MeshModel sphere = make_icosphere(1.0, 2);
    const auto four = select_keypoints_fps(sphere, 4, 0);
    double min_d = 1e9;
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = i + 1; j < 4; ++j) {
            min_d = std::min(min_d, (four[i] - four[j]).norm());
        }
    }
    CHECK(min_d >= 1.0);

    CHECK(select_keypoints_fps(sphere, 4, 0) == select_keypoints_fps(sphere, 4, 0));
    CHECK_THROWS_AS(select_keypoints_fps(cube, static_cast<int>(cube.vertices.size()) + 1, 0), DomainError);
    CHECK_THROWS_AS(select_keypoints_fps(cube, 0, 0), DomainError);
}

TEST_CASE("radial map at a projected keypoint is zero") {
    const MeshModel cube = make_box(Vec3(1, 1, 1), 1);
    Pose pose;
    pose.translation = Vec3(0, 0, 3);
    const auto k = square_camera(200, 201);
    const RenderResult r = render_depth(cube, pose, k);
    // Surface point seen by the center pixel, expressed in the model frame.
    const Vec3 kp_model(0, 0, -0.5);
    const RadialMapStack stack = make_radial_maps(r.depth, r.mask, pose, {kp_model, Vec3(0.5, 0.5, 0.5)}, k);
    REQUIRE(stack.size() == 2);
    CHECK(std::abs(stack.maps[0].at(100, 100)) < 1e-6);
    CHECK(stack.maps[0].at(0, 0) == -1.0f);
    CHECK(stack.maps[1].at(0, 0) == -1.0f);
}

TEST_CASE("generated scenes satisfy the label and radial invariants") {
    const auto k = desk_camera();
    const auto objects = desk_objects(4, 0);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const ObjectModel& obj = objects[seed % objects.size()];
        const Scene s = generate_scene({obj}, seed, k, PlacementBox{});
        CHECK(radial_oracle_error(s, k) < 1e-6);
        REQUIRE(s.labels.instances.size() == 1);
        const InstanceLabel& inst = s.labels.instances[0];
        CHECK(inst.class_id == obj.class_id);
        for (std::size_t i = 0; i < inst.keypoints3d.size(); ++i) {
            const Vec2 p = project(apply(inst.pose, inst.keypoints3d[i]), k);
            CHECK((p - inst.keypoints2d[i]).norm() < 0.5);
        }
        for (std::size_t i = 0; i < s.depth.size(); ++i) {
            CHECK((s.depth.data[i] > 0.0f) == (s.labels.mask.data[i] > 0));
            CHECK((s.labels.mask.data[i] == 0 || s.labels.mask.data[i] == 1));
        }

        const Image<float> nd = normalize_depth(s.depth);
        for (std::size_t i = 0; i < nd.size(); ++i) {
            if (s.depth.data[i] > 0.0f) {
                CHECK(nd.data[i] >= 0.0f);
                CHECK(nd.data[i] <= 1.0f);
            } else {
                CHECK(nd.data[i] == 0.0f);
            }
        }
        for (const Vec2& q : normalize_keypoints(inst.keypoints2d, k)) {
            CHECK(q.x() >= 0.0);
            CHECK(q.x() <= 1.0);
            CHECK(q.y() >= 0.0);
            CHECK(q.y() <= 1.0);
        }
    }
}

TEST_CASE("scene generation is deterministic") {
    const auto k = desk_camera();
    const auto objects = desk_objects(4, 0);
    const Scene a = generate_scene({objects[2]}, 42, k, PlacementBox{});
    const Scene b = generate_scene({objects[2]}, 42, k, PlacementBox{});
    CHECK(a.depth == b.depth);
    CHECK(a.labels.mask == b.labels.mask);
    CHECK(a.radial == b.radial);
    CHECK(a.labels.instances[0].pose.matrix() == b.labels.instances[0].pose.matrix());
    const Scene c = generate_scene({objects[2]}, 43, k, PlacementBox{});
    CHECK_FALSE(c.depth == a.depth);
}

TEST_CASE("multi-object scenes never overlap bounding spheres") {
    const auto k = desk_camera();
    const auto objects = desk_objects(4, 0);
    PlacementBox box;
    box.min = Vec3(-0.12, -0.08, 0.5);
    box.max = Vec3(0.12, 0.08, 0.8);
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const Scene s = generate_scene(objects, seed, k, box);
        REQUIRE(s.labels.instances.size() == 3);
        for (std::size_t i = 0; i < 3; ++i) {
            for (std::size_t j = i + 1; j < 3; ++j) {
                const auto& a = s.labels.instances[i];
                const auto& b = s.labels.instances[j];
                const auto [ca, ra] = bounding_sphere(objects[i].mesh);
                const auto [cb, rb] = bounding_sphere(objects[j].mesh);
                CHECK((apply(a.pose, ca) - apply(b.pose, cb)).norm() >= ra + rb);
            }
        }
        if (seed < 5) {
            CHECK(radial_oracle_error(s, k) < 1e-6);
        }
    }
}

TEST_CASE("placement failure raises a capacity error") {
    const auto objects = desk_objects(4, 0);
    PlacementBox tiny;
    tiny.min = tiny.max = Vec3(0, 0, 0.3);
    SceneOptions opts;
    opts.max_retries = 20;
    CHECK_THROWS_AS(generate_scene({objects[0], objects[1]}, 1, desk_camera(), tiny, opts), CapacityError);
}
