#include "radpose/selfsup.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "radpose/errors.h"

namespace radpose {

double smooth_l1(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& gt) {
    if (pred.rows() != gt.rows() || pred.cols() != gt.cols()) {
        throw DomainError("smooth L1 shape mismatch");
    }
    if (pred.size() == 0) {
        throw DomainError("smooth L1 of empty tensors");
    }
    double sum = 0.0;
    for (Eigen::Index i = 0; i < pred.size(); ++i) {
        const double e = std::abs(pred.data()[i] - gt.data()[i]);
        sum += e < 1.0 ? 0.5 * e * e : e - 0.5;
    }
    return sum / static_cast<double>(pred.size());
}

double cross_entropy(const Eigen::MatrixXd& probs, const std::vector<int>& labels) {
    if (probs.rows() != static_cast<Eigen::Index>(labels.size()) || probs.rows() == 0) {
        throw DomainError("cross entropy needs one label per probability row");
    }
    double sum = 0.0;
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
        if (std::abs(probs.row(i).sum() - 1.0) > 1e-6 || (probs.row(i).array() < 0.0).any()) {
            throw DomainError("probability rows must lie on the simplex");
        }
        const int label = labels[static_cast<std::size_t>(i)];
        if (label < 0 || label >= probs.cols()) {
            throw DomainError("class label out of range");
        }
        sum -= std::log(std::max(probs(i, label), 1e-12));
    }
    return sum / static_cast<double>(probs.rows());
}

double total_loss(const LossComponents& c, const LossWeights& w) {
    for (double v : {c.r, c.k, c.c, c.s, c.a}) {
        if (!std::isfinite(v)) {
            throw DomainError("loss components must be finite");
        }
    }
    return w.r * c.r + w.k * c.k + w.c * c.c + w.s * c.s + w.a * c.a;
}

const char* to_string(DataPhase p) { return p == DataPhase::real ? "real" : "syn"; }

ScheduleState schedule_controller(int epoch) {
    if (epoch < 0) {
        throw DomainError("epoch must be non-negative");
    }
    ScheduleState s;
    if (epoch < 80) {
        s.weights = {0.4, 0.4, 0.6, 0.6, 0.0};
    } else {
        s.weights = {0.6, 0.6, 0.4, 0.4, 0.0};
    }
    if (epoch >= 120) {
        s.weights.a = 1.0;
        const bool real = (epoch - 120) % 2 == 0;
        s.phase = real ? DataPhase::real : DataPhase::syn;
        s.adapter_frozen = !real;
    }
    return s;
}

void AugmentationSpec::validate() const {
    if (!(rot_range >= 0.0) || !(trans_range >= 0.0) || cardinality < 0 || !(normalization_diameter > 0.0)) {
        throw DomainError("augmentation ranges must be non-negative and the diameter positive");
    }
}

std::vector<Pose> augment_pose(const Pose& pseudo, const AugmentationSpec& spec, std::uint64_t seed) {
    spec.validate();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::vector<Pose> out;
    out.reserve(static_cast<std::size_t>(spec.cardinality));
    for (int i = 0; i < spec.cardinality; ++i) {
        Vec3 angles, shift;
        for (int a = 0; a < 3; ++a) {
            angles[a] = spec.rot_range * unit(rng);
        }
        for (int a = 0; a < 3; ++a) {
            shift[a] = spec.trans_range * spec.normalization_diameter * unit(rng);
        }
        Pose delta;
        delta.rotation = rotation_from_axis_angles(angles);
        delta.translation = shift;
        out.push_back(compose(pseudo, delta));
    }
    return out;
}

RenderResult composite_syn_over_real(const DepthMap& real_depth, const InstanceMask& real_mask,
                                     const MeshModel& mesh, const Pose& pose, const CameraIntrinsics& k) {
    if (!real_depth.same_shape(real_mask) || real_depth.width != k.width || real_depth.height != k.height) {
        throw DomainError("real depth, mask and intrinsics must agree in size");
    }
    const int overlay = 1 + std::max(0, real_mask.data.empty()
                                            ? 0
                                            : *std::max_element(real_mask.data.begin(), real_mask.data.end()));
    RenderResult out{real_depth, real_mask};
    render_into(out, mesh, pose, k, overlay);
    return out;
}

namespace {

std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace

RadialMapStack corrupt_radial_maps(const RadialMapStack& radial, const CorruptionModel& model, std::uint64_t seed) {
    if (!(model.sigma >= 0.0) || !(model.dropout >= 0.0) || model.dropout > 1.0) {
        throw DomainError("corruption needs sigma >= 0 and dropout in [0, 1]");
    }
    RadialMapStack out = radial;
    if (model.sigma == 0.0 && model.dropout == 0.0) {
        return out;
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, model.sigma > 0.0 ? model.sigma : 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (auto& map : out.maps) {
        for (auto& v : map.data) {
            if (v < 0.0f) {
                continue;
            }
            if (model.dropout > 0.0 && unit(rng) < model.dropout) {
                v = kRadialBackground;
                continue;
            }
            if (model.sigma > 0.0) {
                v = static_cast<float>(std::max(0.0, static_cast<double>(v) + noise(rng)));
            }
        }
    }
    return out;
}

Image<int> class_raster(const LabelSet& labels) {
    Image<int> out(labels.mask.width, labels.mask.height, 0);
    for (std::size_t i = 0; i < labels.mask.data.size(); ++i) {
        const int id = labels.mask.data[i];
        if (id > 0) {
            if (const auto* inst = labels.find(id)) {
                out.data[i] = inst->class_id;
            }
        }
    }
    return out;
}

PseudoLabelResult pseudo_label_pipeline(const Scene& real, const std::vector<ObjectModel>& objects,
                                        const CameraIntrinsics& k, const PseudoLabelOptions& options,
                                        std::uint64_t seed) {
    options.augmentation.validate();
    PseudoLabelResult result;
    int max_class = 0;
    for (const auto& o : objects) {
        if (o.class_id < 1) {
            throw DomainError("object class ids start at 1");
        }
        max_class = std::max(max_class, o.class_id);
    }
    std::vector<std::vector<Vec3>> model_keypoints(static_cast<std::size_t>(max_class) + 1);
    std::vector<const ObjectModel*> by_class(static_cast<std::size_t>(max_class) + 1, nullptr);
    for (const auto& o : objects) {
        model_keypoints[static_cast<std::size_t>(o.class_id)] = o.keypoints;
        by_class[static_cast<std::size_t>(o.class_id)] = &o;
    }

    const RadialMapStack radial = corrupt_radial_maps(real.radial, options.corruption, mix(seed, 0));
    const Image<int> classes = class_raster(real.labels);
    const KeypointSet candidates = detect_keypoints(radial, real.depth, classes, k, options.detection);
    const auto groups = group_instances(candidates, model_keypoints, options.grouping);
    if (groups.empty()) {
        result.diagnostic = "no instance found: " + std::to_string(candidates.entries.size()) + " keypoint candidates";
        return result;
    }

    std::uint64_t stream = 1;
    for (const auto& group : groups) {
        const auto cls = static_cast<std::size_t>(group.class_id);
        if (cls >= by_class.size() || by_class[cls] == nullptr) {
            continue;
        }
        const ObjectModel& object = *by_class[cls];
        Correspondences c;
        for (const auto& e : group.keypoints.entries) {
            c.model_pts.push_back(object.keypoints[static_cast<std::size_t>(e.keypoint_index)]);
            c.image_pts.push_back(e.kp2d);
            c.weights.push_back(std::clamp(e.score, 1e-6, 1.0));
        }
        PseudoLabel label;
        label.class_id = group.class_id;
        try {
            const PnpResult pnp = epnp(c, k);
            label.pseudo_pose = pnp.pose;
            label.reprojection_rmse = pnp.reprojection_rmse;
        } catch (const DegeneracyError& err) {
            result.diagnostic += std::string("class ") + std::to_string(group.class_id) + ": " + err.what() + "; ";
            continue;
        }
        label.final_pose = label.pseudo_pose;
        if (options.refine_with_icp) {
            InstanceMask mask(classes.width, classes.height, 0);
            for (std::size_t i = 0; i < mask.data.size(); ++i) {
                mask.data[i] = classes.data[i] == group.class_id ? 1 : 0;
            }
            label.final_pose = icp_refine(label.pseudo_pose, object.mesh, real.depth, mask, k, options.icp).pose;
        }
        label.augmented = augment_pose(label.pseudo_pose, options.augmentation, mix(seed, stream++));
        if (options.keep_composites) {
            for (const auto& pose : label.augmented) {
                label.composites.push_back(
                    composite_syn_over_real(real.depth, real.labels.mask, object.mesh, pose, k));
            }
            label.composites.push_back(
                composite_syn_over_real(real.depth, real.labels.mask, object.mesh, label.pseudo_pose, k));
        }
        result.instances.push_back(std::move(label));
    }
    if (result.instances.empty() && result.diagnostic.empty()) {
        result.diagnostic = "no instance found";
    }
    return result;
}

}  // namespace radpose
