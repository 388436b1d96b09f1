#include "radpose/metrics.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "radpose/errors.h"
#include "radpose/synth.h"

namespace radpose {

namespace {

std::vector<Vec3> transformed(const MeshModel& mesh, const Pose& pose) {
    std::vector<Vec3> out;
    out.reserve(mesh.vertices.size());
    for (const auto& v : mesh.vertices) {
        out.push_back(pose.rotation * v + pose.translation);
    }
    return out;
}

void require_vertices(const MeshModel& mesh) {
    if (mesh.vertices.empty()) {
        throw DomainError("metric needs a mesh with vertices");
    }
}

}  // namespace

double add(const MeshModel& mesh, const Pose& pose_gt, const Pose& pose_est) {
    require_vertices(mesh);
    double sum = 0.0;
    for (const auto& v : mesh.vertices) {
        sum += (apply(pose_gt, v) - apply(pose_est, v)).norm();
    }
    return sum / static_cast<double>(mesh.vertices.size());
}

double add_s(const MeshModel& mesh, const Pose& pose_gt, const Pose& pose_est) {
    require_vertices(mesh);
    const auto gt = transformed(mesh, pose_gt);
    const auto est = transformed(mesh, pose_est);
    double sum = 0.0;
    for (const auto& g : gt) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& e : est) {
            best = std::min(best, (g - e).squaredNorm());
        }
        sum += std::sqrt(best);
    }
    return sum / static_cast<double>(gt.size());
}

double add_threshold_accuracy(const std::vector<AddEntry>& entries, double fraction) {
    if (!(fraction > 0.0)) {
        throw DomainError("threshold fraction must be positive");
    }
    if (entries.empty()) {
        return 0.0;
    }
    std::size_t pass = 0;
    for (const auto& e : entries) {
        const double err = e.symmetric ? e.add_s : e.add;
        if (err < fraction * e.diameter) {
            ++pass;
        }
    }
    return static_cast<double>(pass) / static_cast<double>(entries.size());
}

double add_s_auc(const std::vector<double>& errors, double max_threshold) {
    if (!(max_threshold > 0.0)) {
        throw DomainError("AUC threshold must be positive");
    }
    if (errors.empty()) {
        throw DomainError("AUC of an empty error list");
    }
    double area = 0.0;
    for (double e : errors) {
        area += std::max(0.0, max_threshold - e);
    }
    return area / (max_threshold * static_cast<double>(errors.size()));
}

std::vector<std::pair<double, double>> accuracy_curve(const std::vector<double>& errors, double max_threshold,
                                                      int steps) {
    if (errors.empty() || steps < 1 || !(max_threshold > 0.0)) {
        throw DomainError("accuracy curve needs errors, steps >= 1 and a positive threshold");
    }
    std::vector<double> sorted(errors);
    std::sort(sorted.begin(), sorted.end());
    std::vector<std::pair<double, double>> curve;
    for (int i = 0; i <= steps; ++i) {
        const double t = max_threshold * i / steps;
        const auto below = std::lower_bound(sorted.begin(), sorted.end(), t) - sorted.begin();
        curve.emplace_back(t, static_cast<double>(below) / static_cast<double>(sorted.size()));
    }
    return curve;
}

double mssd(const MeshModel& mesh, const Pose& pose_gt, const Pose& pose_est) {
    require_vertices(mesh);
    const auto est = transformed(mesh, pose_est);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& sym : mesh.symmetries) {
        const Pose gt = compose(pose_gt, sym);
        double worst = 0.0;
        for (std::size_t i = 0; i < est.size(); ++i) {
            worst = std::max(worst, (est[i] - apply(gt, mesh.vertices[i])).norm());
        }
        best = std::min(best, worst);
    }
    return best;
}

double mspd(const MeshModel& mesh, const Pose& pose_gt, const Pose& pose_est, const CameraIntrinsics& k) {
    require_vertices(mesh);
    std::vector<Vec2> est;
    est.reserve(mesh.vertices.size());
    for (const auto& v : mesh.vertices) {
        est.push_back(project(apply(pose_est, v), k));
    }
    double best = std::numeric_limits<double>::infinity();
    for (const auto& sym : mesh.symmetries) {
        const Pose gt = compose(pose_gt, sym);
        double worst = 0.0;
        for (std::size_t i = 0; i < est.size(); ++i) {
            worst = std::max(worst, (est[i] - project(apply(gt, mesh.vertices[i]), k)).norm());
        }
        best = std::min(best, worst);
    }
    return best;
}

VsdResult vsd(const DepthMap& depth_gt_render, const DepthMap& depth_est_render, const DepthMap& depth_scene,
              double tau, double delta) {
    if (!depth_gt_render.same_shape(depth_est_render) || !depth_gt_render.same_shape(depth_scene)) {
        throw DomainError("VSD inputs differ in shape");
    }
    if (!(tau > 0.0) || !(delta > 0.0)) {
        throw DomainError("VSD tau and delta must be positive");
    }
    std::size_t union_count = 0;
    std::size_t bad = 0;
    for (std::size_t i = 0; i < depth_scene.data.size(); ++i) {
        const double g = depth_gt_render.data[i];
        const double e = depth_est_render.data[i];
        const double s = depth_scene.data[i];
        const bool vis_g = g > 0.0 && std::abs(g - s) < delta;
        const bool vis_e = e > 0.0 && std::abs(e - s) < delta;
        if (!vis_g && !vis_e) {
            continue;
        }
        ++union_count;
        if (!(vis_g && vis_e) || std::abs(g - e) > tau) {
            ++bad;
        }
    }
    if (union_count == 0) {
        return {0.0, true};
    }
    return {static_cast<double>(bad) / static_cast<double>(union_count), false};
}

std::array<double, kRecallSteps> recall_fractions() {
    std::array<double, kRecallSteps> f{};
    for (int i = 0; i < kRecallSteps; ++i) {
        f[i] = 0.05 * (i + 1);
    }
    return f;
}

std::array<double, kRecallSteps> vsd_over_tau_grid(const DepthMap& depth_gt_render, const DepthMap& depth_est_render,
                                                  const DepthMap& depth_scene, double diameter, double delta) {
    std::array<double, kRecallSteps> out{};
    const auto fractions = recall_fractions();
    for (int i = 0; i < kRecallSteps; ++i) {
        out[i] = vsd(depth_gt_render, depth_est_render, depth_scene, fractions[i] * diameter, delta).value;
    }
    return out;
}

ArReport ar_recall(const std::vector<ArEntry>& entries) {
    if (entries.empty()) {
        throw DomainError("AR recall of an empty list");
    }
    const auto fractions = recall_fractions();
    double vsd_hits = 0.0, mssd_hits = 0.0, mspd_hits = 0.0;
    for (const auto& e : entries) {
        for (int t = 0; t < kRecallSteps; ++t) {
            for (int th = 0; th < kRecallSteps; ++th) {
                vsd_hits += e.vsd[t] < fractions[th] ? 1.0 : 0.0;
            }
        }
        const double px_scale = static_cast<double>(e.image_width) / 640.0;
        for (int th = 0; th < kRecallSteps; ++th) {
            mssd_hits += e.mssd < fractions[th] * e.diameter ? 1.0 : 0.0;
            mspd_hits += e.mspd < 5.0 * (th + 1) * px_scale ? 1.0 : 0.0;
        }
    }
    const double n = static_cast<double>(entries.size());
    ArReport r;
    r.ar_vsd = vsd_hits / (n * kRecallSteps * kRecallSteps);
    r.ar_mssd = mssd_hits / (n * kRecallSteps);
    r.ar_mspd = mspd_hits / (n * kRecallSteps);
    r.ar = (r.ar_vsd + r.ar_mssd + r.ar_mspd) / 3.0;
    return r;
}

PoseMetrics evaluate_pose(const MeshModel& mesh, const Pose& pose_gt, const Pose& pose_est, const CameraIntrinsics& k,
                          const DepthMap* scene, double delta) {
    PoseMetrics m;
    m.add = add(mesh, pose_gt, pose_est);
    m.add_s = add_s(mesh, pose_gt, pose_est);
    m.mssd = mssd(mesh, pose_gt, pose_est);
    m.mspd = mspd(mesh, pose_gt, pose_est, k);
    const RenderResult gt = render_depth(mesh, pose_gt, k);
    const RenderResult est = render_depth(mesh, pose_est, k);
    const DepthMap& scene_depth = scene ? *scene : gt.depth;
    m.ar.vsd = vsd_over_tau_grid(gt.depth, est.depth, scene_depth, mesh.diameter, delta);
    m.vsd = vsd(gt.depth, est.depth, scene_depth, 0.2 * mesh.diameter, delta).value;
    m.ar.mssd = m.mssd;
    m.ar.mspd = m.mspd;
    m.ar.diameter = mesh.diameter;
    m.ar.image_width = k.width;
    return m;
}

}  // namespace radpose
