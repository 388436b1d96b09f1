#include "doctest.h"

#include <algorithm>
#include <random>

#include "radpose/errors.h"
#include "radpose/selfsup.h"
#include "radpose/voting.h"
#include "support.h"

using namespace radpose;

namespace {

RadialMapStack single_map(const Image<float>& m) {
    RadialMapStack s;
    s.maps.push_back(m);
    return s;
}

KeypointSet exact_candidates(const std::vector<Vec3>& kps, int class_id) {
    KeypointSet out;
    for (std::size_t i = 0; i < kps.size(); ++i) {
        out.entries.push_back({Vec2::Zero(), kps[i], class_id, 1.0, static_cast<int>(i)});
    }
    return out;
}

const std::vector<Vec3> kModel{Vec3(0.05, 0, 0), Vec3(0, 0.04, 0), Vec3(0, 0, 0.03), Vec3(-0.03, -0.02, 0.01)};

}  // namespace

TEST_CASE("invert_radial_map examples") {
    Image<float> m(4, 1, -1.0f);
    m.at(0, 0) = 0.5f;
    m.at(1, 0) = 0.1f;
    m.at(2, 0) = 0.3f;
    const auto inv = invert_radial_map(single_map(m), 0.1, 0.5);
    CHECK(inv.maps[0].at(0, 0) == doctest::Approx(0.0));
    CHECK(inv.maps[0].at(1, 0) == doctest::Approx(1.0));
    CHECK(inv.maps[0].at(2, 0) == doctest::Approx(0.5));
    CHECK(inv.maps[0].at(3, 0) == -1.0f);
    CHECK_THROWS_AS(invert_radial_map(single_map(m), 0.5, 0.5), DomainError);
    CHECK_THROWS_AS(invert_radial_map(single_map(m), 0.6, 0.5), DomainError);
}

TEST_CASE("invert_radial_map is affine and order reversing") {
    std::mt19937 rng(8);
    std::uniform_real_distribution<float> u(0.0f, 0.3f);
    Image<float> m(50, 1, -1.0f);
    for (int i = 0; i < 40; ++i) {
        m.at(i, 0) = u(rng);
    }
    const auto inv = invert_radial_map(single_map(m), 0.0, 0.3);
    for (int i = 0; i < 40; ++i) {
        for (int j = 0; j < 40; ++j) {
            if (m.at(i, 0) < m.at(j, 0)) {
                CHECK(inv.maps[0].at(i, 0) >= inv.maps[0].at(j, 0));
            }
        }
        CHECK(inv.maps[0].at(i, 0) == doctest::Approx((0.3 - m.at(i, 0)) / 0.3).epsilon(1e-6));
    }
    for (int i = 40; i < 50; ++i) {
        CHECK(inv.maps[0].at(i, 0) == -1.0f);
    }
}

TEST_CASE("single pixel with zero radius votes for its own voxel") {
    CameraIntrinsics k;
    k.fx = k.fy = 100;
    k.cx = k.cy = 2;
    k.width = k.height = 5;
    DepthMap depth(5, 5, 0.0f);
    Image<float> radial(5, 5, -1.0f);
    depth.at(3, 1) = 0.5f;
    radial.at(3, 1) = 0.0f;
    GridSpec spec;
    spec.voxel_size = 0.01;
    const VoteGrid g = vote_radial_map(radial, depth, k, spec);
    CHECK(g.total() == 1.0);
    const Vec3 c = backproject(Vec2(3, 1), 0.5, k);
    const auto idx = g.voxel_of(c);
    CHECK(g.counts[g.linear_index(idx[0], idx[1], idx[2])] == 1.0);

    const auto peak = extract_peak(g);
    REQUIRE(peak);
    CHECK((peak->kp3d - g.center(idx[0], idx[1], idx[2])).norm() < 1e-12);
    CHECK(peak->score == 1.0);
}

TEST_CASE("all-background maps produce an empty grid") {
    const CameraIntrinsics k = desk_camera();
    DepthMap depth(k.width, k.height, 0.0f);
    Image<float> radial(k.width, k.height, -1.0f);
    GridSpec spec;
    spec.origin = Vec3::Zero();
    spec.dims = std::array<int, 3>{4, 4, 4};
    const VoteGrid g = vote_radial_map(radial, depth, k, spec);
    CHECK(g.total() == 0.0);
    CHECK_FALSE(extract_peak(g).has_value());
}

TEST_CASE("shell accumulation matches a brute-force voxel scan") {
    const CameraIntrinsics k = desk_camera();
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> ur(0.0, 0.06);
    std::uniform_int_distribution<int> pu(30, 130), pv(20, 100);
    DepthMap depth(k.width, k.height, 0.0f);
    Image<float> radial(k.width, k.height, -1.0f);
    for (int i = 0; i < 20; ++i) {
        const int u = pu(rng), v = pv(rng);
        depth.at(u, v) = static_cast<float>(0.3 + 0.01 * (i % 5));
        radial.at(u, v) = static_cast<float>(ur(rng));
    }
    GridSpec spec;
    spec.voxel_size = 0.004;
    const VoteGrid g = vote_radial_map(radial, depth, k, spec);
    std::vector<double> brute(g.voxel_count(), 0.0);
    for (int v = 0; v < k.height; ++v) {
        for (int u = 0; u < k.width; ++u) {
            if (radial.at(u, v) < 0.0f || depth.at(u, v) <= 0.0f) {
                continue;
            }
            const Vec3 c = backproject(Vec2(u, v), depth.at(u, v), k);
            for (int z = 0; z < g.dims[2]; ++z) {
                for (int y = 0; y < g.dims[1]; ++y) {
                    for (int x = 0; x < g.dims[0]; ++x) {
                        if (std::abs((g.center(x, y, z) - c).norm() - radial.at(u, v)) <= 0.5 * g.voxel_size) {
                            brute[g.linear_index(x, y, z)] += 1.0;
                        }
                    }
                }
            }
        }
    }
    CHECK(g.counts == brute);
    CHECK(g.voters == 20);
}

TEST_CASE("peak ties resolve to the lowest linear index") {
    VoteGrid g;
    g.voxel_size = 1.0;
    g.dims = {6, 1, 1};
    g.counts = {0, 0, 2, 0, 0, 2};
    g.voters = 4;
    const auto peak = extract_peak(g);
    REQUIRE(peak);
    CHECK(peak->voxel == std::array<int, 3>{2, 0, 0});
    CHECK(peak->score == 0.5);
    CHECK((peak->kp3d - Vec3(2, 0, 0)).norm() < 1e-12);
}

TEST_CASE("threaded voting equals sequential voting") {
    const auto k = desk_camera();
    const auto objects = desk_objects(4, 0);
    const Scene s = generate_scene({objects[0]}, 5, k, PlacementBox{});
    GridSpec seq;
    GridSpec par;
    par.threads = 3;
    for (std::size_t j = 0; j < s.radial.size(); ++j) {
        const VoteGrid a = vote_radial_map(s.radial.maps[j], s.depth, k, seq);
        const VoteGrid b = vote_radial_map(s.radial.maps[j], s.depth, k, par);
        CHECK(a.counts == b.counts);
    }
}

TEST_CASE("voting budget raises a capacity error") {
    const auto k = desk_camera();
    const Scene s = generate_scene({desk_objects(4, 0)[1]}, 2, k, PlacementBox{});
    GridSpec spec;
    spec.max_voxels = 1000;
    CHECK_THROWS_AS(vote_radial(s.radial, s.depth, k, spec), CapacityError);
}

TEST_CASE("noise-free scenes recover every keypoint within one voxel") {
    const auto k = desk_camera();
    const auto objects = desk_objects(4, 0);
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        const Scene s = generate_scene({objects[seed % 3]}, seed, k, PlacementBox{});
        const InstanceLabel& inst = s.labels.instances[0];
        GridSpec spec;
        const auto grids = vote_radial(s.radial, s.depth, k, spec);
        for (std::size_t j = 0; j < grids.size(); ++j) {
            const auto peak = extract_peak(grids[j]);
            REQUIRE(peak);
            const Vec3 gt = apply(inst.pose, inst.keypoints3d[j]);
            // The raw peak is quantized; the multilateration refinement is not.
            CHECK((peak->kp3d - gt).norm() <= 2.0 * spec.voxel_size);
            CHECK((refine_keypoint(s.radial.maps[j], s.depth, k, peak->kp3d) - gt).norm() <= spec.voxel_size);
            CHECK(peak->score > 0.0);
            CHECK(peak->score <= 1.0);
        }
    }
}

TEST_CASE("noisy radii keep peaks within two voxels") {
    const auto k = desk_camera();
    const auto objects = desk_objects(4, 0);
    int within = 0, total = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Scene s = generate_scene({objects[seed % 3]}, 100 + seed, k, PlacementBox{});
        const InstanceLabel& inst = s.labels.instances[0];
        GridSpec spec;
        const auto noisy = corrupt_radial_maps(s.radial, CorruptionModel{2.0 * spec.voxel_size, 0.0}, seed);
        const auto grids = vote_radial(noisy, s.depth, k, spec);
        for (std::size_t j = 0; j < grids.size(); ++j) {
            const auto peak = extract_peak(grids[j]);
            ++total;
            if (!peak) {
                continue;
            }
            const Vec3 kp = refine_keypoint(noisy.maps[j], s.depth, k, peak->kp3d);
            if ((kp - apply(inst.pose, inst.keypoints3d[j])).norm() <= 2.0 * spec.voxel_size) {
                ++within;
            }
        }
    }
    CHECK(within >= 0.9 * total);
}

TEST_CASE("refinement needs enough voters") {
    CameraIntrinsics k;
    k.fx = k.fy = 100;
    k.cx = k.cy = 2;
    k.width = k.height = 5;
    DepthMap depth(5, 5, 0.0f);
    Image<float> radial(5, 5, -1.0f);
    depth.at(1, 1) = depth.at(3, 3) = 0.5f;
    radial.at(1, 1) = radial.at(3, 3) = 0.02f;
    const Vec3 x0(0.0, 0.0, 0.52);
    CHECK(refine_keypoint(radial, depth, k, x0) == x0);
}

TEST_CASE("detect_keypoints reports refined candidates per class") {
    const auto k = desk_camera();
    const auto objects = desk_objects(4, 0);
    const Scene s = generate_scene({objects[1]}, 3, k, PlacementBox{});
    const InstanceLabel& inst = s.labels.instances[0];
    const KeypointSet kps = detect_keypoints(s.radial, s.depth, class_raster(s.labels), k);
    REQUIRE(kps.entries.size() == 4);
    for (const auto& e : kps.entries) {
        CHECK(e.class_id == inst.class_id);
        const Vec3 gt = apply(inst.pose, inst.keypoints3d[e.keypoint_index]);
        CHECK((e.kp3d - gt).norm() < 1e-3);
        CHECK((e.kp2d - project(e.kp3d, k)).norm() < 1e-9);
    }
    for (std::size_t i = 1; i < kps.entries.size(); ++i) {
        CHECK(kps.entries[i - 1].score >= kps.entries[i].score);
    }
}

TEST_CASE("mirror peaks in observed free space give way to the true keypoint") {
    // A single visible box face votes equally for a keypoint and its mirror
    // image across the face; the mirror lands in front of the surface.
    const auto k = desk_camera();
    const auto objects = desk_objects(4, 0);
    const Scene s = generate_scene({objects[1]}, 5028, k, PlacementBox{});
    const InstanceLabel& inst = s.labels.instances[0];
    const Image<int> classes = class_raster(s.labels);
    auto worst = [&](const DetectionOptions& o) {
        double w = 0.0;
        for (const auto& e : detect_keypoints(s.radial, s.depth, classes, k, o).entries) {
            w = std::max(w, (e.kp3d - apply(inst.pose, inst.keypoints3d[e.keypoint_index])).norm());
        }
        return w;
    };
    DetectionOptions unscreened;
    unscreened.free_space_margin = 0.0;
    CHECK(worst(unscreened) > 0.05);
    CHECK(worst(DetectionOptions{}) <= 0.005);
}

TEST_CASE("grouping a single exact instance") {
    const auto groups = group_instances(exact_candidates(kModel, 1), {{}, kModel});
    REQUIRE(groups.size() == 1);
    CHECK(groups[0].class_id == 1);
    CHECK(groups[0].keypoints.entries.size() == 4);
    CHECK(groups[0].discrepancy < 1e-12);
}

TEST_CASE("grouping separates two instances one meter apart") {
    std::mt19937_64 rng(1);
    const Mat3 r1 = testing_support::random_rotation(rng);
    const Mat3 r2 = testing_support::random_rotation(rng);
    std::vector<Vec3> a, b;
    for (const auto& m : kModel) {
        a.push_back(r1 * m + Vec3(0, 0, 0.5));
        b.push_back(r2 * m + Vec3(1, 0, 0.5));
    }
    KeypointSet cands = exact_candidates(a, 1);
    for (const auto& e : exact_candidates(b, 1).entries) {
        cands.entries.push_back(e);
    }
    std::shuffle(cands.entries.begin(), cands.entries.end(), rng);
    const auto groups = group_instances(cands, {{}, kModel});
    REQUIRE(groups.size() == 2);
    for (const auto& g : groups) {
        CHECK(g.keypoints.entries.size() == 4);
        CHECK(g.discrepancy < 1e-6);
        const double x0 = g.keypoints.entries[0].kp3d.x();
        for (const auto& e : g.keypoints.entries) {
            CHECK(std::abs(e.kp3d.x() - x0) < 0.5);
        }
    }
}

TEST_CASE("grouping excludes a distant outlier") {
    std::vector<Vec3> a;
    for (const auto& m : kModel) {
        a.push_back(m + Vec3(0, 0, 0.5));
    }
    KeypointSet cands = exact_candidates(a, 1);
    cands.entries.push_back({Vec2::Zero(), Vec3(10, 0, 0.5), 1, 1.0, 0});
    const auto groups = group_instances(cands, {{}, kModel});
    REQUIRE(groups.size() == 1);
    for (const auto& e : groups[0].keypoints.entries) {
        CHECK(e.kp3d.x() < 1.0);
    }
    CHECK(groups[0].discrepancy < 1e-12);
}

TEST_CASE("grouping drops instances below the keypoint minimum") {
    KeypointSet cands = exact_candidates({kModel[0], kModel[1], kModel[2]}, 1);
    CHECK(group_instances(cands, {{}, kModel}).empty());
    KeypointSet background = exact_candidates(kModel, 0);
    CHECK(group_instances(background, {kModel}).empty());
}

TEST_CASE("keypoint sets sort by class then score") {
    KeypointSet s;
    s.entries = {{Vec2::Zero(), Vec3::Zero(), 2, 0.1, 0},
                 {Vec2::Zero(), Vec3::Zero(), 1, 0.2, 0},
                 {Vec2::Zero(), Vec3::Zero(), 1, 0.9, 1},
                 {Vec2::Zero(), Vec3::Zero(), 2, 0.7, 1}};
    s.sort_by_class_and_score();
    CHECK(s.entries[0].class_id == 1);
    CHECK(s.entries[0].score == 0.9);
    CHECK(s.entries[2].class_id == 2);
    CHECK(s.entries[2].score == 0.7);
}
