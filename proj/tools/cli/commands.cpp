#include "cli/commands.h"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "radpose/errors.h"
#include "radpose/mesh_io.h"
#include "radpose/metrics.h"
#include "radpose/pnp.h"
#include "radpose/raster_io.h"
#include "radpose/rkhs.h"
#include "radpose/selfsup.h"
#include "radpose/serialize.h"
#include "radpose/synth.h"
#include "radpose/voting.h"

namespace radpose::cli {

using nlohmann::json;

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

namespace {

std::string num(double v) {
    if (std::isnan(v)) {
        return "nan";
    }
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void ensure_dir(const fs::path& dir) {
    if (dir.empty()) {
        throw DomainError("an output directory is required");
    }
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) {
        throw IoError("cannot create directory " + dir.string());
    }
}

void require_file(const fs::path& p, const char* what) {
    if (p.empty()) {
        throw DomainError(std::string("missing required input: ") + what);
    }
    if (!fs::is_regular_file(p)) {
        throw IoError(std::string(what) + " not found: " + p.string());
    }
}

// Runs body(i) for i in [0, n) on up to `threads` workers.
void parallel_for(int n, int threads, const std::function<void(int)>& body) {
    threads = std::max(1, std::min(threads, n));
    if (threads == 1) {
        for (int i = 0; i < n; ++i) {
            body(i);
        }
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (int i = next++; i < n; i = next++) {
                try {
                    body(i);
                } catch (...) {
                    errors[static_cast<std::size_t>(i)] = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) {
        th.join();
    }
    for (const auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

std::string scene_name(int i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "scene_%04d", i);
    return buf;
}

std::string mesh_name(int class_id) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "obj_%02d.off", class_id);
    return buf;
}

// Fisher-Yates with explicit draws so the order does not depend on the
// standard library's shuffle.
std::vector<std::size_t> pick_objects(std::size_t available, int count, std::mt19937_64& rng) {
    if (count < 1 || static_cast<std::size_t>(count) > available) {
        throw DomainError("objects per scene must be between 1 and " + std::to_string(available));
    }
    std::vector<std::size_t> idx(available);
    for (std::size_t i = 0; i < available; ++i) {
        idx[i] = i;
    }
    for (std::size_t i = available - 1; i > 0; --i) {
        std::swap(idx[i], idx[rng() % (i + 1)]);
    }
    idx.resize(static_cast<std::size_t>(count));
    return idx;
}

Image<float> class_image(const Image<int>& classes) {
    Image<float> out(classes.width, classes.height, 0.0f);
    for (std::size_t i = 0; i < classes.data.size(); ++i) {
        out.data[i] = static_cast<float>(classes.data[i]);
    }
    return out;
}

Image<int> to_int_image(const InstanceMask& mask) {
    Image<int> out(mask.width, mask.height, 0);
    for (std::size_t i = 0; i < mask.data.size(); ++i) {
        out.data[i] = mask.data[i];
    }
    return out;
}

struct ModelEntry {
    int class_id = 0;
    std::vector<Vec3> keypoints;
    fs::path mesh_path;
};

json models_to_json(const std::vector<ObjectModel>& objects) {
    json classes = json::array();
    for (const auto& o : objects) {
        classes.push_back({{"class_id", o.class_id},
                           {"mesh", (fs::path("meshes") / mesh_name(o.class_id)).generic_string()},
                           {"diameter", o.mesh.diameter},
                           {"keypoints", to_json(o.keypoints)}});
    }
    return {{"classes", classes}};
}

std::vector<ModelEntry> read_models(const fs::path& path) {
    require_file(path, "model file");
    const json j = read_json(path);
    if (!j.contains("classes") || !j["classes"].is_array()) {
        throw DomainError("model file lacks a 'classes' array");
    }
    std::vector<ModelEntry> out;
    for (const auto& c : j["classes"]) {
        ModelEntry e;
        e.class_id = c.at("class_id").get<int>();
        e.keypoints = points3_from_json(c.at("keypoints"));
        if (c.contains("mesh")) {
            e.mesh_path = path.parent_path() / c["mesh"].get<std::string>();
        }
        out.push_back(std::move(e));
    }
    return out;
}

std::vector<std::vector<Vec3>> keypoints_by_class(const std::vector<ModelEntry>& models) {
    int max_class = 0;
    for (const auto& m : models) {
        max_class = std::max(max_class, m.class_id);
    }
    std::vector<std::vector<Vec3>> out(static_cast<std::size_t>(max_class) + 1);
    for (const auto& m : models) {
        if (m.class_id < 1) {
            throw DomainError("class ids start at 1");
        }
        out[static_cast<std::size_t>(m.class_id)] = m.keypoints;
    }
    return out;
}

CameraIntrinsics load_intrinsics(const fs::path& path) {
    if (path.empty()) {
        return desk_camera();
    }
    require_file(path, "intrinsics");
    return intrinsics_from_json(read_json(path));
}

}  // namespace

void gen_data(const GenDataOptions& o, const Globals& g) {
    if (o.scenes < 0 || o.keypoints < 1) {
        throw DomainError("scenes must be >= 0 and keypoints >= 1");
    }
    ensure_dir(o.out);
    ensure_dir(o.out / "meshes");
    const CameraIntrinsics k = desk_camera();
    const std::vector<ObjectModel> objects = desk_objects(o.keypoints, g.seed);
    for (const auto& obj : objects) {
        save_mesh(o.out / "meshes" / mesh_name(obj.class_id), obj.mesh);
    }
    write_json(o.out / "model_keypoints.json", models_to_json(objects));
    write_json(o.out / "intrinsics.json", to_json(k));

    parallel_for(o.scenes, g.threads, [&](int i) {
        std::mt19937_64 rng(derive_seed(g.seed, static_cast<std::uint64_t>(2 * i)));
        std::vector<ObjectModel> chosen;
        for (std::size_t idx : pick_objects(objects.size(), o.objects_per_scene, rng)) {
            chosen.push_back(objects[idx]);
        }
        const Scene scene = generate_scene(chosen, derive_seed(g.seed, static_cast<std::uint64_t>(2 * i + 1)), k,
                                           PlacementBox{});
        const fs::path dir = o.out / scene_name(i);
        ensure_dir(dir);
        write_rkr1(dir / "depth.rkr", to_raster(scene.depth));
        write_rkr1(dir / "mask.rkr", to_raster(scene.labels.mask));
        write_rkr1(dir / "classes.rkr", to_raster(class_image(class_raster(scene.labels))));
        write_rkr1(dir / "radial.rkr", to_raster(scene.radial.maps));
        write_json(dir / "labels.json", to_json(scene.labels));
    });
}

void vote(const VoteOptions& o, const Globals& g) {
    require_file(o.radial, "radial stack");
    require_file(o.depth, "depth raster");
    const CameraIntrinsics k = load_intrinsics(o.intrinsics);
    RadialMapStack radial;
    radial.maps = planes_from_raster(read_rkr1(o.radial));
    const DepthMap depth = depth_from_raster(read_rkr1(o.depth));
    Image<int> classes;
    if (!o.classes.empty()) {
        require_file(o.classes, "class raster");
        classes = to_int_image(mask_from_raster(read_rkr1(o.classes)));
    } else {
        classes = Image<int>(depth.width, depth.height, 0);
        for (std::size_t i = 0; i < depth.data.size(); ++i) {
            classes.data[i] = depth.data[i] > 0.0f ? 1 : 0;
        }
    }
    if (!depth.same_shape(k.width, k.height)) {
        throw DomainError("depth raster does not match the intrinsics");
    }
    DetectionOptions det;
    det.grid.voxel_size = o.voxel;
    det.grid.threads = g.threads;
    det.max_instances_per_class = o.max_instances;
    det.peak_separation = o.peak_separation;
    const KeypointSet kps = detect_keypoints(radial, depth, classes, k, det);
    ensure_dir(o.out);
    write_json(o.out / "keypoints.json", to_json(kps));
}

void estimate(const EstimateOptions& o, const Globals&) {
    require_file(o.keypoints, "keypoint set");
    const KeypointSet kps = keypoints_from_json(read_json(o.keypoints));
    const std::vector<ModelEntry> models = read_models(o.models);
    const CameraIntrinsics k = load_intrinsics(o.intrinsics);
    GroupingOptions grouping;
    grouping.min_keypoints = o.min_keypoints;
    grouping.discrepancy_tolerance = o.discrepancy_tolerance;
    const auto by_class = keypoints_by_class(models);
    const auto groups = group_instances(kps, by_class, grouping);

    DepthMap depth;
    Image<int> classes;
    if (o.icp) {
        require_file(o.depth, "depth raster");
        require_file(o.classes, "class raster");
        depth = depth_from_raster(read_rkr1(o.depth));
        classes = to_int_image(mask_from_raster(read_rkr1(o.classes)));
    }
    std::map<int, MeshModel> meshes;

    json poses = json::array();
    for (const auto& group : groups) {
        Correspondences c;
        for (const auto& e : group.keypoints.entries) {
            c.model_pts.push_back(by_class[static_cast<std::size_t>(group.class_id)][static_cast<std::size_t>(e.keypoint_index)]);
            c.image_pts.push_back(e.kp2d);
            c.weights.push_back(std::clamp(e.score, 1e-6, 1.0));
        }
        const PnpResult pnp = epnp(c, k);
        json item = {{"class_id", group.class_id},
                     {"pose", to_json(pnp.pose)},
                     {"rmse", pnp.reprojection_rmse},
                     {"discrepancy", group.discrepancy},
                     {"num_keypoints", c.model_pts.size()}};
        if (o.icp) {
            if (!meshes.count(group.class_id)) {
                const auto it = std::find_if(models.begin(), models.end(),
                                             [&](const ModelEntry& m) { return m.class_id == group.class_id; });
                if (it == models.end() || it->mesh_path.empty()) {
                    throw DomainError("no mesh for class " + std::to_string(group.class_id));
                }
                meshes[group.class_id] = load_mesh(it->mesh_path);
            }
            InstanceMask mask(classes.width, classes.height, 0);
            for (std::size_t i = 0; i < mask.data.size(); ++i) {
                mask.data[i] = classes.data[i] == group.class_id ? 1 : 0;
            }
            const IcpResult icp = icp_refine(pnp.pose, meshes[group.class_id], depth, mask, k);
            item["icp_pose"] = to_json(icp.pose);
            item["icp_skipped"] = icp.skipped;
            item["icp_objective"] = icp.final_objective;
        }
        poses.push_back(std::move(item));
    }
    ensure_dir(o.out);
    write_json(o.out / "poses.json", poses);
}

namespace {

struct PoseItem {
    int class_id = 0;
    Pose pose;
};

std::vector<PoseItem> read_pose_items(const fs::path& path) {
    require_file(path, "pose list");
    const json j = read_json(path);
    std::vector<PoseItem> out;
    if (j.is_object() && j.contains("instances")) {
        for (const auto& inst : labels_from_json(j).instances) {
            out.push_back({inst.class_id, inst.pose});
        }
        return out;
    }
    if (!j.is_array()) {
        throw DomainError("pose list must be an array");
    }
    for (const auto& item : j) {
        if (item.is_object()) {
            PoseItem p;
            p.class_id = item.value("class_id", 0);
            p.pose = pose_from_json(item.at("pose"));
            out.push_back(p);
        } else {
            out.push_back({0, pose_from_json(item)});
        }
    }
    return out;
}

}  // namespace

void eval(const EvalOptions& o, const Globals&) {
    const std::vector<PoseItem> gt = read_pose_items(o.gt);
    const std::vector<PoseItem> est = read_pose_items(o.est);
    const CameraIntrinsics k = load_intrinsics(o.intrinsics);
    const std::set<std::string> known{"add", "adds", "auc", "mssd", "mspd", "vsd", "ar"};
    std::set<std::string> wanted;
    for (const auto& m : o.metrics) {
        if (!known.count(m)) {
            throw DomainError("unknown metric '" + m + "'");
        }
        wanted.insert(m);
    }
    if (gt.empty()) {
        throw DomainError("no ground-truth poses");
    }

    std::map<int, MeshModel> by_class;
    if (!o.models.empty()) {
        for (const auto& m : read_models(o.models)) {
            by_class[m.class_id] = load_mesh(m.mesh_path);
        }
    } else {
        if (o.meshes.empty()) {
            throw DomainError("eval needs --mesh or --models");
        }
        for (std::size_t i = 0; i < o.meshes.size(); ++i) {
            require_file(o.meshes[i], "mesh");
            by_class[static_cast<int>(i) + 1] = load_mesh(o.meshes[i]);
        }
    }
    auto mesh_for = [&](int class_id) -> const MeshModel& {
        if (by_class.size() == 1 && o.models.empty()) {
            return by_class.begin()->second;
        }
        const auto it = by_class.find(class_id);
        if (it == by_class.end()) {
            throw DomainError("no mesh for class " + std::to_string(class_id));
        }
        return it->second;
    };

    // Match estimates to GT by class id when both carry one, else by order.
    std::vector<int> match(gt.size(), -1);
    std::vector<bool> used(est.size(), false);
    for (std::size_t i = 0; i < gt.size(); ++i) {
        for (std::size_t j = 0; j < est.size(); ++j) {
            if (used[j]) {
                continue;
            }
            const bool by_id = gt[i].class_id != 0 && est[j].class_id != 0;
            if ((by_id && gt[i].class_id == est[j].class_id) || (!by_id && j == i)) {
                match[i] = static_cast<int>(j);
                used[j] = true;
                break;
            }
        }
    }

    const double inf = std::numeric_limits<double>::infinity();
    std::vector<AddEntry> add_entries;
    std::vector<ArEntry> ar_entries;
    std::vector<double> adds_errors;
    std::ostringstream csv;
    csv << "index,class_id,matched";
    for (const char* m : {"add", "adds", "mssd", "mspd", "vsd"}) {
        if (wanted.count(m)) {
            csv << ',' << m;
        }
    }
    csv << '\n';
    for (std::size_t i = 0; i < gt.size(); ++i) {
        const MeshModel& mesh = mesh_for(gt[i].class_id);
        PoseMetrics m;
        if (match[i] >= 0) {
            m = evaluate_pose(mesh, gt[i].pose, est[static_cast<std::size_t>(match[i])].pose, k, nullptr,
                              o.vsd_delta);
        } else {
            m.add = m.add_s = m.mssd = m.mspd = inf;
            m.vsd = 1.0;
            m.ar.vsd.fill(1.0);
            m.ar.mssd = m.ar.mspd = inf;
            m.ar.diameter = mesh.diameter;
            m.ar.image_width = k.width;
        }
        add_entries.push_back({m.add, m.add_s, mesh.diameter, mesh.symmetries.size() > 1});
        ar_entries.push_back(m.ar);
        adds_errors.push_back(m.add_s);
        csv << i << ',' << gt[i].class_id << ',' << (match[i] >= 0 ? 1 : 0);
        if (wanted.count("add")) csv << ',' << num(m.add);
        if (wanted.count("adds")) csv << ',' << num(m.add_s);
        if (wanted.count("mssd")) csv << ',' << num(m.mssd);
        if (wanted.count("mspd")) csv << ',' << num(m.mspd);
        if (wanted.count("vsd")) csv << ',' << num(m.vsd);
        csv << '\n';
    }

    json summary = {{"poses", gt.size()}, {"matched", std::count(used.begin(), used.end(), true)}};
    if (wanted.count("add") || wanted.count("adds")) {
        summary["add_accuracy"] = add_threshold_accuracy(add_entries, o.fraction);
        summary["add_fraction"] = o.fraction;
    }
    ensure_dir(o.out);
    if (wanted.count("auc")) {
        summary["adds_auc"] = add_s_auc(adds_errors, o.auc_max);
        summary["auc_max_threshold"] = o.auc_max;
        std::ostringstream curve;
        curve << "threshold,accuracy\n";
        for (const auto& [t, acc] : accuracy_curve(adds_errors, o.auc_max, o.auc_steps)) {
            curve << num(t) << ',' << num(acc) << '\n';
        }
        write_text(o.out / "auc_curve.csv", curve.str());
    }
    if (wanted.count("ar")) {
        const ArReport ar = ar_recall(ar_entries);
        summary["ar_vsd"] = ar.ar_vsd;
        summary["ar_mssd"] = ar.ar_mssd;
        summary["ar_mspd"] = ar.ar_mspd;
        summary["ar"] = ar.ar;
    }
    write_text(o.out / "per_pose.csv", csv.str());
    write_json(o.out / "summary.json", summary);
}

namespace {

rkhs::FeatureBatch read_features(const fs::path& path) {
    require_file(path, "feature file");
    rkhs::FeatureBatch batch;
    if (path.extension() == ".json") {
        const json j = read_json(path);
        batch = matrix_from_json(j.is_object() ? j.at("features") : j);
    } else {
        const Raster r = read_rkr1(path);
        if (r.channels != 1) {
            throw DomainError("feature rasters must have one channel (rows = samples, columns = features)");
        }
        batch.resize(r.height, r.width);
        for (std::uint32_t v = 0; v < r.height; ++v) {
            for (std::uint32_t u = 0; u < r.width; ++u) {
                batch(v, u) = r.at(0, u, v);
            }
        }
    }
    rkhs::validate_batch(batch);
    return batch;
}

}  // namespace

void mmd_fit(const MmdFitOptions& o, const Globals& g) {
    rkhs::FeatureBatch src = read_features(o.source);
    rkhs::FeatureBatch dst = read_features(o.target);
    if (src.cols() != dst.cols()) {
        throw DomainError("feature files differ in dimension");
    }
    const bool truncated = rkhs::truncate_to_common(src, dst);
    if (o.lift < 1) {
        throw DomainError("lift factor must be >= 1");
    }
    if (o.lift > 1) {
        const Eigen::MatrixXd lift = rkhs::random_lift_matrix(src.cols(), o.lift, g.seed);
        src = rkhs::apply_lift(src, lift);
        dst = rkhs::apply_lift(dst, lift);
    }

    rkhs::FitOptions fit;
    fit.lr = o.lr;
    fit.epochs = o.epochs;
    fit.estimator = rkhs::estimator_from_string(o.estimator);
    if (o.objective == "minimize") {
        fit.objective = rkhs::Objective::minimize;
    } else if (o.objective == "maximize") {
        fit.objective = rkhs::Objective::maximize;
    } else {
        throw DomainError("objective must be minimize or maximize");
    }
    if (o.scale == "m2") {
        fit.scale = rkhs::PaperScale::per_m_squared;
    } else if (o.scale == "m") {
        fit.scale = rkhs::PaperScale::per_m;
    } else {
        throw DomainError("scale must be m2 or m");
    }
    rkhs::Kernel initial;
    if (o.kernel == "linear") {
        initial = rkhs::LinearKernel{rkhs::KernelWeights::identity(src.cols())};
    } else if (o.kernel == "rbf") {
        initial = rkhs::RbfKernel{o.rbf_w};
    } else {
        throw DomainError("kernel must be linear or rbf");
    }

    const rkhs::FitResult result = rkhs::fit_kernel_weights({{src, dst}}, initial, fit);
    ensure_dir(o.out);
    std::ostringstream trace;
    trace << "epoch,value\n";
    for (std::size_t e = 0; e < result.trace.size(); ++e) {
        trace << e << ',' << num(result.trace[e]) << '\n';
    }
    write_text(o.out / "trace.csv", trace.str());
    if (const auto* lin = std::get_if<rkhs::LinearKernel>(&result.kernel)) {
        write_json(o.out / "weights.json", to_json(lin->weights));
    } else {
        write_json(o.out / "weights.json", {{"w", std::get<rkhs::RbfKernel>(result.kernel).w}});
    }

    json summary = {{"kernel", o.kernel},
                    {"estimator", rkhs::to_string(fit.estimator)},
                    {"samples", src.rows()},
                    {"features", src.cols()},
                    {"truncated", truncated},
                    {"diverged", result.diverged},
                    {"initial", result.trace.front()},
                    {"final", result.trace.back()}};
    try {
        summary["kl_gaussianized"] = rkhs::kl_divergence_gaussianized(src, dst);
    } catch (const DomainError&) {
        summary["kl_gaussianized"] = nullptr;
    }
    summary["sliced_w1"] = rkhs::wasserstein_1d_sliced(src, dst, o.projections, g.seed);
    write_json(o.out / "summary.json", summary);
}

void pipeline(const PipelineOptions& o, const Globals& g) {
    if (o.scenes < 0 || o.batch_size < 1 || o.keypoints < 4) {
        throw DomainError("pipeline needs scenes >= 0, batch size >= 1 and at least 4 keypoints");
    }
    ensure_dir(o.out);
    const CameraIntrinsics k = desk_camera();
    const std::vector<ObjectModel> objects = desk_objects(o.keypoints, g.seed);
    double max_diameter = 0.0;
    for (const auto& obj : objects) {
        max_diameter = std::max(max_diameter, obj.mesh.diameter);
    }
    PseudoLabelOptions opts;
    opts.corruption.sigma = o.corruption_sigma;
    opts.corruption.dropout = o.dropout;
    opts.detection.grid.voxel_size = o.voxel;
    opts.augmentation.cardinality = o.batch_size - 1;
    opts.augmentation.normalization_diameter = max_diameter;
    opts.refine_with_icp = o.icp;

    struct Outcome {
        json record;
        std::string row;
        std::vector<RenderResult> composites;
    };
    std::vector<Outcome> outcomes(static_cast<std::size_t>(o.scenes));
    parallel_for(o.scenes, g.threads, [&](int i) {
        std::mt19937_64 rng(derive_seed(g.seed, static_cast<std::uint64_t>(3 * i)));
        const ObjectModel& object = objects[pick_objects(objects.size(), 1, rng).front()];
        const std::vector<ObjectModel> chosen{object};
        const Scene scene =
            generate_scene(chosen, derive_seed(g.seed, static_cast<std::uint64_t>(3 * i + 1)), k, PlacementBox{});
        const PseudoLabelResult res =
            pseudo_label_pipeline(scene, chosen, k, opts, derive_seed(g.seed, static_cast<std::uint64_t>(3 * i + 2)));
        const InstanceLabel& gt = scene.labels.instances.front();
        Outcome& out = outcomes[static_cast<std::size_t>(i)];
        out.record = {{"scene", i}, {"class_id", gt.class_id}, {"gt_pose", to_json(gt.pose)}};
        if (res.instances.empty()) {
            out.record["found"] = false;
            out.record["diagnostic"] = res.diagnostic;
            out.row = std::to_string(i) + ',' + std::to_string(gt.class_id) + ",0,nan,nan,0,0";
            return;
        }
        const PseudoLabel& label = res.instances.front();
        const double add_pseudo = add(object.mesh, gt.pose, label.pseudo_pose);
        const double add_final = add(object.mesh, gt.pose, label.final_pose);
        const bool passed = add_final < 0.1 * object.mesh.diameter;
        out.record["found"] = true;
        out.record["pseudo_pose"] = to_json(label.pseudo_pose);
        out.record["final_pose"] = to_json(label.final_pose);
        out.record["add_pseudo"] = add_pseudo;
        out.record["add_final"] = add_final;
        out.record["reprojection_rmse"] = label.reprojection_rmse;
        out.record["augmented_poses"] = to_json(label.augmented);
        out.record["composites"] = label.composites.size();
        out.row = std::to_string(i) + ',' + std::to_string(gt.class_id) + ",1," + num(add_pseudo) + ',' +
                  num(add_final) + ',' + (passed ? "1" : "0") + ',' + std::to_string(label.composites.size());
        if (o.write_composites) {
            out.composites = label.composites;
        }
    });

    std::ostringstream csv;
    csv << "scene,class_id,found,add_pseudo,add_final,passed,composites\n";
    for (int i = 0; i < o.scenes; ++i) {
        const Outcome& out = outcomes[static_cast<std::size_t>(i)];
        write_json(o.out / (scene_name(i) + ".json"), out.record);
        csv << out.row << '\n';
        if (!out.composites.empty()) {
            const fs::path dir = o.out / scene_name(i);
            ensure_dir(dir);
            for (std::size_t c = 0; c < out.composites.size(); ++c) {
                char name[48];
                std::snprintf(name, sizeof(name), "composite_%02zu", c);
                write_rkr1(dir / (std::string(name) + "_depth.rkr"), to_raster(out.composites[c].depth));
                write_rkr1(dir / (std::string(name) + "_mask.rkr"), to_raster(out.composites[c].mask));
            }
        }
    }
    write_text(o.out / "summary.csv", csv.str());
}

}  // namespace radpose::cli
