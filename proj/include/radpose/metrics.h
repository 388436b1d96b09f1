#pragma once

#include <array>
#include <vector>

#include "radpose/geometry.h"
#include "radpose/image.h"

namespace radpose {

/// Mean distance between corresponding model vertices under the two poses.
double add(const MeshModel& mesh, const Pose& pose_gt, const Pose& pose_est);

/// Mean over GT-posed vertices of the distance to the nearest est-posed
/// vertex.
double add_s(const MeshModel& mesh, const Pose& pose_gt, const Pose& pose_est);

struct AddEntry {
    double add = 0.0;
    double add_s = 0.0;
    double diameter = 0.0;
    bool symmetric = false;
};

/// Share of entries whose error (ADD-S for symmetric objects, ADD otherwise)
/// is below fraction * diameter.
double add_threshold_accuracy(const std::vector<AddEntry>& entries, double fraction = 0.1);

/// Normalized area under the accuracy-vs-threshold curve on [0, max_threshold].
/// Exact for the step-function accuracy: mean of max(0, T - e) / T.
double add_s_auc(const std::vector<double>& errors, double max_threshold = 0.1);

/// Accuracy (share of errors below t) at `steps` + 1 evenly spaced thresholds
/// from 0 to max_threshold.
std::vector<std::pair<double, double>> accuracy_curve(const std::vector<double>& errors, double max_threshold,
                                                      int steps);

/// min over symmetries S of max over vertices |est(v) - gt(S(v))|, meters.
double mssd(const MeshModel& mesh, const Pose& pose_gt, const Pose& pose_est);

/// Projected counterpart of mssd, pixels.
double mspd(const MeshModel& mesh, const Pose& pose_gt, const Pose& pose_est, const CameraIntrinsics& k);

struct VsdResult {
    double value = 0.0;
    /// Set when neither render is visible; value is then 0.
    bool empty_union = false;
};

/// Visible surface discrepancy. A render pixel is visible when it has depth
/// and |render - scene| < delta. Over the union of the visible masks, the
/// share of pixels visible in only one render or whose depths differ by more
/// than tau.
VsdResult vsd(const DepthMap& depth_gt_render, const DepthMap& depth_est_render, const DepthMap& depth_scene,
              double tau, double delta = 0.015);

inline constexpr int kRecallSteps = 10;

/// 0.05, 0.10, ..., 0.50.
std::array<double, kRecallSteps> recall_fractions();

struct ArEntry {
    /// VSD at tau = recall_fractions()[i] * diameter.
    std::array<double, kRecallSteps> vsd{};
    double mssd = 0.0;
    double mspd = 0.0;
    double diameter = 0.0;
    int image_width = 640;
};

struct ArReport {
    double ar_vsd = 0.0;
    double ar_mssd = 0.0;
    double ar_mspd = 0.0;
    double ar = 0.0;
};

/// VSD values over the tau grid for one pose pair.
std::array<double, kRecallSteps> vsd_over_tau_grid(const DepthMap& depth_gt_render, const DepthMap& depth_est_render,
                                                  const DepthMap& depth_scene, double diameter, double delta = 0.015);

/// Mean recalls over the threshold grids: VSD error below theta for every
/// (tau, theta) pair, MSSD below theta * diameter, MSPD below
/// k * image_width / 640 pixels with k = 5, 10, ..., 50. ar is the mean of
/// the three. Throws DomainError on an empty list.
ArReport ar_recall(const std::vector<ArEntry>& entries);

struct PoseMetrics {
    double add = 0.0;
    double add_s = 0.0;
    double mssd = 0.0;
    double mspd = 0.0;
    /// VSD at tau = 0.2 * diameter, the single-number summary.
    double vsd = 0.0;
    ArEntry ar;
};

/// All per-pose metrics. Renders come from render_depth at each pose; when
/// `scene` is null the GT render serves as the scene depth.
PoseMetrics evaluate_pose(const MeshModel& mesh, const Pose& pose_gt, const Pose& pose_est, const CameraIntrinsics& k,
                          const DepthMap* scene = nullptr, double delta = 0.015);

}  // namespace radpose
