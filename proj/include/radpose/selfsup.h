#pragma once

#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "radpose/geometry.h"
#include "radpose/pnp.h"
#include "radpose/synth.h"
#include "radpose/voting.h"

namespace radpose {

/// Mean over elements of 0.5 e^2 when |e| < 1, |e| - 0.5 otherwise.
double smooth_l1(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& gt);

/// Mean of -log p[label] over rows, with p floored at 1e-12. Rows must sum
/// to 1 within 1e-6 and labels index a column.
double cross_entropy(const Eigen::MatrixXd& probs, const std::vector<int>& labels);

/// Radial, keypoint, classification, visibility-score and adapter terms.
struct LossComponents {
    double r = 0.0;
    double k = 0.0;
    double c = 0.0;
    double s = 0.0;
    double a = 0.0;
};

struct LossWeights {
    double r = 0.0;
    double k = 0.0;
    double c = 0.0;
    double s = 0.0;
    double a = 0.0;

    bool operator==(const LossWeights&) const = default;
};

double total_loss(const LossComponents& components, const LossWeights& w);

enum class DataPhase { syn, real };
const char* to_string(DataPhase p);

struct ScheduleState {
    LossWeights weights;
    bool adapter_frozen = true;
    DataPhase phase = DataPhase::syn;
};

/// Training schedule as a pure function of the epoch. Epochs below 80 favor
/// classification and visibility scores (0.6) over the regressions (0.4);
/// from 80 on the emphasis swaps. Before 120 every epoch is synthetic with a
/// frozen adapter. From 120 the adapter weight is 1 and epochs alternate,
/// starting with a real epoch in which the adapter is unfrozen.
ScheduleState schedule_controller(int epoch);

struct AugmentationSpec {
    double rot_range = std::numbers::pi / 18.0;
    double trans_range = 0.1;
    int cardinality = 7;
    /// Translations are scaled by this length (the largest object diameter).
    double normalization_diameter = 1.0;

    void validate() const;
};

/// `cardinality` poses pseudo ∘ delta, where delta rotates by per-axis angles
/// uniform in [-rot_range, rot_range] and translates by components uniform in
/// [-trans_range, trans_range] * normalization_diameter, in the model frame.
std::vector<Pose> augment_pose(const Pose& pseudo, const AugmentationSpec& spec, std::uint64_t seed);

/// Z-buffers a render of `mesh` at `pose` against the real depth. Pixels the
/// render wins take the overlay id, one above the largest existing mask id.
RenderResult composite_syn_over_real(const DepthMap& real_depth, const InstanceMask& real_mask,
                                     const MeshModel& mesh, const Pose& pose, const CameraIntrinsics& k);

/// Stand-in for network radial estimates: Gaussian noise on every foreground
/// radius and random dropout of foreground pixels to background.
struct CorruptionModel {
    double sigma = 0.0;
    double dropout = 0.0;
};

RadialMapStack corrupt_radial_maps(const RadialMapStack& radial, const CorruptionModel& model, std::uint64_t seed);

struct PseudoLabelOptions {
    CorruptionModel corruption;
    DetectionOptions detection;
    GroupingOptions grouping;
    AugmentationSpec augmentation;
    bool refine_with_icp = false;
    IcpOptions icp;
    /// Keep the composite rasters in the result (they dominate memory).
    bool keep_composites = true;
};

struct PseudoLabel {
    int class_id = 0;
    Pose pseudo_pose;
    /// pseudo_pose after optional ICP refinement.
    Pose final_pose;
    double reprojection_rmse = 0.0;
    std::vector<Pose> augmented;
    /// One composite per augmented pose, then the composite at pseudo_pose.
    std::vector<RenderResult> composites;
};

struct PseudoLabelResult {
    std::vector<PseudoLabel> instances;
    std::string diagnostic;
};

/// Pixel class ids from the instance mask of a labeled scene.
Image<int> class_raster(const LabelSet& labels);

/// Corrupts the scene's radial maps, votes per class, groups candidates into
/// instances, solves ePnP with candidate scores as weights, augments each
/// pseudo-pose and renders the composites. `objects` supplies mesh and model
/// keypoints per class id. An empty result carries a diagnostic.
PseudoLabelResult pseudo_label_pipeline(const Scene& real, const std::vector<ObjectModel>& objects,
                                        const CameraIntrinsics& k, const PseudoLabelOptions& options,
                                        std::uint64_t seed);

}  // namespace radpose
