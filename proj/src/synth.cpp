#include "radpose/synth.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "radpose/errors.h"

namespace radpose {

const InstanceLabel* LabelSet::find(int instance_id) const {
    for (const auto& inst : instances) {
        if (inst.instance_id == instance_id) {
            return &inst;
        }
    }
    return nullptr;
}

RenderResult empty_render(const CameraIntrinsics& k) {
    return {DepthMap(k.width, k.height, 0.0f), InstanceMask(k.width, k.height, 0)};
}

void render_into(RenderResult& target, const MeshModel& mesh, const Pose& pose, const CameraIntrinsics& k,
                 int instance_id) {
    k.validate();
    if (!target.depth.same_shape(k.width, k.height) || !target.mask.same_shape(k.width, k.height)) {
        throw DomainError("render target does not match intrinsics");
    }
    std::vector<Vec3> cam(mesh.vertices.size());
    std::vector<Vec2> pix(mesh.vertices.size());
    for (std::size_t i = 0; i < cam.size(); ++i) {
        cam[i] = apply(pose, mesh.vertices[i]);
        if (!(cam[i].z() > 0.0)) {
            throw DomainError("object is not fully in front of the camera");
        }
        pix[i] = project(cam[i], k);
    }

    for (const auto& f : mesh.faces) {
        const Vec2& q0 = pix[f[0]];
        const Vec2& q1 = pix[f[1]];
        const Vec2& q2 = pix[f[2]];
        const double area = (q1 - q0).x() * (q2 - q0).y() - (q1 - q0).y() * (q2 - q0).x();
        if (std::abs(area) < 1e-12) {
            continue;
        }
        const double sign = area > 0.0 ? 1.0 : -1.0;
        const int u0 = std::max(0, static_cast<int>(std::ceil(std::min({q0.x(), q1.x(), q2.x()}))));
        const int u1 = std::min(k.width - 1, static_cast<int>(std::floor(std::max({q0.x(), q1.x(), q2.x()}))));
        const int v0 = std::max(0, static_cast<int>(std::ceil(std::min({q0.y(), q1.y(), q2.y()}))));
        const int v1 = std::min(k.height - 1, static_cast<int>(std::floor(std::max({q0.y(), q1.y(), q2.y()}))));
        if (u0 > u1 || v0 > v1) {
            continue;
        }
        const Vec3& p0 = cam[f[0]];
        const Vec3 normal = (cam[f[1]] - p0).cross(cam[f[2]] - p0);
        const double plane = normal.dot(p0);
        const double zlo = std::min({p0.z(), cam[f[1]].z(), cam[f[2]].z()});
        const double zhi = std::max({p0.z(), cam[f[1]].z(), cam[f[2]].z()});

        auto edge = [](const Vec2& a, const Vec2& b, double px, double py) {
            return (b.x() - a.x()) * (py - a.y()) - (b.y() - a.y()) * (px - a.x());
        };
        for (int v = v0; v <= v1; ++v) {
            for (int u = u0; u <= u1; ++u) {
                const double w0 = sign * edge(q1, q2, u, v);
                const double w1 = sign * edge(q2, q0, u, v);
                const double w2 = sign * edge(q0, q1, u, v);
                if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0) {
                    continue;
                }
                // Exact ray/plane intersection along the pixel-center ray.
                const Vec3 ray((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
                const double denom = normal.dot(ray);
                if (std::abs(denom) < 1e-300) {
                    continue;
                }
                const double z = std::clamp(plane / denom, zlo, zhi);
                float& d = target.depth.at(u, v);
                if (d == 0.0f || z < d) {
                    d = static_cast<float>(z);
                    target.mask.at(u, v) = instance_id;
                }
            }
        }
    }
}

RenderResult render_depth(const MeshModel& mesh, const Pose& pose, const CameraIntrinsics& k) {
    k.validate();
    RenderResult out = empty_render(k);
    render_into(out, mesh, pose, k, 1);
    return out;
}

namespace {

std::size_t pick_tie(const std::vector<std::size_t>& ties, std::mt19937_64& rng) {
    return ties.size() == 1 ? ties.front() : ties[rng() % ties.size()];
}

}  // namespace

std::vector<Vec3> select_keypoints_fps(const MeshModel& mesh, int n, std::uint64_t seed) {
    if (n < 1) {
        throw DomainError("keypoint count must be at least 1");
    }
    if (mesh.empty()) {
        throw DomainError("cannot sample keypoints from an empty mesh");
    }
    if (static_cast<std::size_t>(n) > mesh.vertices.size()) {
        throw DomainError("requested more keypoints than the mesh has vertices");
    }
    std::mt19937_64 rng(seed);
    const auto& verts = mesh.vertices;
    const Vec3 center = mesh.centroid();

    auto argmax_with_ties = [&](const std::vector<double>& score) {
        const double best = *std::max_element(score.begin(), score.end());
        std::vector<std::size_t> ties;
        for (std::size_t i = 0; i < score.size(); ++i) {
            if (score[i] == best) {
                ties.push_back(i);
            }
        }
        return pick_tie(ties, rng);
    };

    std::vector<double> score(verts.size());
    for (std::size_t i = 0; i < verts.size(); ++i) {
        score[i] = (verts[i] - center).squaredNorm();
    }
    std::vector<Vec3> picked;
    std::size_t current = argmax_with_ties(score);
    picked.push_back(verts[current]);

    std::vector<double> nearest(verts.size(), std::numeric_limits<double>::infinity());
    while (static_cast<int>(picked.size()) < n) {
        for (std::size_t i = 0; i < verts.size(); ++i) {
            nearest[i] = std::min(nearest[i], (verts[i] - verts[current]).squaredNorm());
        }
        current = argmax_with_ties(nearest);
        picked.push_back(verts[current]);
    }
    return picked;
}

namespace {

void check_radial_inputs(const DepthMap& depth, const InstanceMask& mask) {
    if (!depth.same_shape(mask)) {
        throw DomainError("depth and mask shapes differ");
    }
}

}  // namespace

RadialMapStack make_radial_maps(const DepthMap& depth, const InstanceMask& mask, const Pose& pose,
                                const std::vector<Vec3>& keypoints3d, const CameraIntrinsics& k) {
    check_radial_inputs(depth, mask);
    LabelSet labels;
    labels.mask = mask;
    // Every foreground id resolves to the same instance.
    InstanceLabel inst;
    inst.instance_id = 1;
    inst.pose = pose;
    inst.keypoints3d = keypoints3d;
    labels.instances.push_back(inst);
    for (auto& id : labels.mask.data) {
        id = id > 0 ? 1 : 0;
    }
    return make_radial_maps(depth, labels, k);
}

RadialMapStack make_radial_maps(const DepthMap& depth, const LabelSet& labels, const CameraIntrinsics& k) {
    check_radial_inputs(depth, labels.mask);
    std::size_t n = labels.instances.empty() ? 0 : labels.instances.front().keypoints3d.size();
    for (const auto& inst : labels.instances) {
        if (inst.keypoints3d.size() != n) {
            throw DomainError("instances disagree on keypoint count");
        }
    }
    // Keypoints in the camera frame, indexed by instance id.
    int max_id = 0;
    for (const auto& inst : labels.instances) {
        max_id = std::max(max_id, inst.instance_id);
    }
    std::vector<std::vector<Vec3>> cam_kps(static_cast<std::size_t>(max_id) + 1);
    for (const auto& inst : labels.instances) {
        for (const auto& kp : inst.keypoints3d) {
            cam_kps[static_cast<std::size_t>(inst.instance_id)].push_back(apply(inst.pose, kp));
        }
    }

    RadialMapStack stack;
    stack.maps.assign(n, Image<float>(depth.width, depth.height, kRadialBackground));
    for (int v = 0; v < depth.height; ++v) {
        for (int u = 0; u < depth.width; ++u) {
            const int id = labels.mask.at(u, v);
            const float d = depth.at(u, v);
            if (id <= 0 || d <= 0.0f || id > max_id || cam_kps[static_cast<std::size_t>(id)].size() != n) {
                continue;
            }
            const Vec3 p = backproject(Vec2(u, v), d, k);
            for (std::size_t j = 0; j < n; ++j) {
                stack.maps[j].at(u, v) = static_cast<float>((p - cam_kps[static_cast<std::size_t>(id)][j]).norm());
            }
        }
    }
    return stack;
}

std::pair<Vec3, double> bounding_sphere(const MeshModel& mesh) {
    const Vec3 c = mesh.centroid();
    double r = 0.0;
    for (const auto& v : mesh.vertices) {
        r = std::max(r, (v - c).norm());
    }
    return {c, r};
}

namespace {

Mat3 random_rotation(std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::Vector4d q;
    do {
        for (int i = 0; i < 4; ++i) {
            q[i] = normal(rng);
        }
    } while (q.norm() < 1e-9);
    q.normalize();
    return Eigen::Quaterniond(q[0], q[1], q[2], q[3]).toRotationMatrix();
}

}  // namespace

Scene generate_scene(const std::vector<ObjectModel>& objects, std::uint64_t seed, const CameraIntrinsics& k,
                     const PlacementBox& box, const SceneOptions& options) {
    k.validate();
    if (objects.empty()) {
        throw DomainError("scene needs at least one object");
    }
    for (const auto& obj : objects) {
        if (obj.mesh.empty() || obj.keypoints.size() != objects.front().keypoints.size()) {
            throw DomainError("objects must be non-empty and share the keypoint count");
        }
        if (obj.class_id < 1) {
            throw DomainError("object class ids start at 1");
        }
    }
    std::mt19937_64 rng(seed);
    struct Placed {
        Vec3 center;
        double radius;
    };
    std::vector<Placed> placed;

    Scene scene;
    RenderResult render = empty_render(k);
    for (std::size_t idx = 0; idx < objects.size(); ++idx) {
        const auto& obj = objects[idx];
        const auto [model_center, radius] = bounding_sphere(obj.mesh);
        bool accepted = false;
        Pose pose;
        for (int attempt = 0; attempt < options.max_retries && !accepted; ++attempt) {
            pose.rotation = random_rotation(rng);
            for (int a = 0; a < 3; ++a) {
                std::uniform_real_distribution<double> dist(box.min[a], box.max[a]);
                pose.translation[a] = dist(rng);
            }
            const Vec3 center = apply(pose, model_center);
            accepted = std::all_of(placed.begin(), placed.end(), [&](const Placed& p) {
                return (p.center - center).norm() > p.radius + radius;
            });
            for (std::size_t i = 0; accepted && i < obj.mesh.vertices.size(); ++i) {
                const Vec3 c = apply(pose, obj.mesh.vertices[i]);
                if (c.z() <= 1e-3) {
                    accepted = false;
                    break;
                }
                const Vec2 q = project(c, k);
                accepted = q.x() >= options.border_margin && q.y() >= options.border_margin &&
                           q.x() <= k.width - 1 - options.border_margin &&
                           q.y() <= k.height - 1 - options.border_margin;
            }
            if (accepted) {
                placed.push_back({center, radius});
            }
        }
        if (!accepted) {
            throw CapacityError("could not place object " + std::to_string(idx) + " after " +
                                std::to_string(options.max_retries) + " attempts");
        }
        const int instance_id = static_cast<int>(idx) + 1;
        render_into(render, obj.mesh, pose, k, instance_id);

        InstanceLabel label;
        label.instance_id = instance_id;
        label.class_id = obj.class_id;
        label.pose = pose;
        label.keypoints3d = obj.keypoints;
        for (const auto& kp : obj.keypoints) {
            label.keypoints2d.push_back(project(apply(pose, kp), k));
        }
        scene.labels.instances.push_back(std::move(label));
    }
    scene.depth = std::move(render.depth);
    scene.labels.mask = std::move(render.mask);
    scene.radial = make_radial_maps(scene.depth, scene.labels, k);
    return scene;
}

Image<float> normalize_depth(const DepthMap& depth) {
    Image<float> out(depth.width, depth.height, 0.0f);
    float lo = std::numeric_limits<float>::infinity();
    float hi = -std::numeric_limits<float>::infinity();
    for (float d : depth.data) {
        if (d > 0.0f) {
            lo = std::min(lo, d);
            hi = std::max(hi, d);
        }
    }
    if (!(hi >= lo)) {
        return out;
    }
    const float span = hi - lo;
    for (std::size_t i = 0; i < depth.size(); ++i) {
        const float d = depth.data[i];
        if (d > 0.0f) {
            out.data[i] = span > 0.0f ? (d - lo) / span : 0.0f;
        }
    }
    return out;
}

std::vector<Vec2> normalize_keypoints(const std::vector<Vec2>& keypoints2d, const CameraIntrinsics& k) {
    std::vector<Vec2> out;
    out.reserve(keypoints2d.size());
    for (const auto& p : keypoints2d) {
        out.emplace_back(p.x() / k.width, p.y() / k.height);
    }
    return out;
}

CameraIntrinsics desk_camera() {
    CameraIntrinsics k;
    k.fx = 120.0;
    k.fy = 120.0;
    k.cx = 79.5;
    k.cy = 59.5;
    k.width = 160;
    k.height = 120;
    return k;
}

std::vector<ObjectModel> desk_objects(int num_keypoints, std::uint64_t seed) {
    std::vector<ObjectModel> out;
    out.push_back({make_ellipsoid(Vec3(0.06, 0.04, 0.03), 3), {}, 1});
    out.push_back({make_box(Vec3(0.09, 0.06, 0.04), 4), {}, 2});
    out.push_back({make_cylinder(0.03, 0.09, 32, 6), {}, 3});
    for (auto& obj : out) {
        obj.keypoints = select_keypoints_fps(obj.mesh, num_keypoints, seed);
    }
    return out;
}

}  // namespace radpose
