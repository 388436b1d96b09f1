#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <vector>

#include "radpose/geometry.h"
#include "radpose/image.h"
#include "radpose/synth.h"

namespace radpose {

/// Dense accumulator over a regular voxel lattice. `origin` is the center of
/// voxel (0, 0, 0); voxel (i, j, k) is stored at linear index
/// (k * dims[1] + j) * dims[0] + i.
struct VoteGrid {
    Vec3 origin = Vec3::Zero();
    double voxel_size = 0.005;
    std::array<int, 3> dims{0, 0, 0};
    std::vector<double> counts;
    /// Number of foreground pixels that voted into this grid.
    std::size_t voters = 0;

    std::size_t voxel_count() const {
        return static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]) * static_cast<std::size_t>(dims[2]);
    }
    std::size_t linear_index(int i, int j, int k) const {
        return (static_cast<std::size_t>(k) * dims[1] + static_cast<std::size_t>(j)) * dims[0] + static_cast<std::size_t>(i);
    }
    Vec3 center(int i, int j, int k) const { return origin + voxel_size * Vec3(i, j, k); }
    /// Voxel whose center is nearest to `p` (may be outside the grid).
    std::array<int, 3> voxel_of(const Vec3& p) const;
    double total() const;
};

struct GridSpec {
    double voxel_size = 0.005;
    std::size_t max_voxels = std::size_t{1} << 23;
    /// Optional fixed lattice; when unset the grid is fitted to the
    /// foreground bounding box padded by the largest radius plus one voxel.
    std::optional<Vec3> origin;
    std::optional<std::array<int, 3>> dims;
    int threads = 1;
};

struct KeypointEntry {
    Vec2 kp2d = Vec2::Zero();
    Vec3 kp3d = Vec3::Zero();
    int class_id = 0;
    double score = 0.0;
    /// Which model keypoint this candidate votes for.
    int keypoint_index = 0;
};

/// Candidate keypoints; class 0 is background and never reaches pose
/// estimation.
struct KeypointSet {
    std::vector<KeypointEntry> entries;

    /// Stable sort by class, then score descending.
    void sort_by_class_and_score();
};

/// (v_max - v) / (v_max - v_min) on foreground, clamped into [0, 1];
/// background stays -1. Throws DomainError if v_max <= v_min.
RadialMapStack invert_radial_map(const RadialMapStack& radial, double v_min, double v_max);

/// Accumulates one grid per radial map. Each foreground pixel (value >= 0,
/// depth > 0, and `pixel_filter` > 0 when given) adds 1 to every voxel whose
/// center x satisfies | |x - c| - r | <= voxel_size / 2, where c is the
/// back-projected pixel. Throws CapacityError when a grid exceeds the budget.
std::vector<VoteGrid> vote_radial(const RadialMapStack& radial, const DepthMap& depth, const CameraIntrinsics& k,
                                  const GridSpec& spec, const Image<int>* pixel_filter = nullptr);

/// Single-map variant.
VoteGrid vote_radial_map(const Image<float>& radial, const DepthMap& depth, const CameraIntrinsics& k,
                         const GridSpec& spec, const Image<int>* pixel_filter = nullptr);

struct Peak {
    Vec3 kp3d = Vec3::Zero();
    double score = 0.0;
    std::array<int, 3> voxel{0, 0, 0};
    double count = 0.0;
};

/// Argmax voxel (lowest linear index wins ties), refined by the count-weighted
/// center of mass of its 3x3x3 neighborhood. Score is peak count over voter
/// count clamped to [0, 1]. Returns nullopt on an empty or all-zero grid.
std::optional<Peak> extract_peak(const VoteGrid& grid);

/// Up to `max_peaks` local peaks in descending count order, each at least
/// `min_separation` meters from the ones before it and holding at least
/// `min_relative_count` of the strongest count.
std::vector<Peak> extract_peaks(const VoteGrid& grid, int max_peaks, double min_separation,
                                double min_relative_count = 0.5);

struct RefineOptions {
    bool enabled = true;
    /// Voters whose shell residual | |x - c| - r | exceeds this (meters) at
    /// the current estimate are left out of the next step.
    double band = 0.04;
    int max_iters = 10;
};

/// Least-squares multilateration started at `x0`: Gauss-Newton on
/// sum (|x - c_i| - r_i)^2 over the voters within the band. Returns x0 when
/// fewer than four voters qualify, the system is singular, or the estimate
/// leaves the band around x0.
Vec3 refine_keypoint(const Image<float>& radial, const DepthMap& depth, const CameraIntrinsics& k, const Vec3& x0,
                     const RefineOptions& options = {}, const Image<int>* pixel_filter = nullptr);

struct InstanceGroup {
    int class_id = 0;
    KeypointSet keypoints;
    /// Mean | |k_i - k_j| - |m_i - m_j| | over assigned keypoint pairs.
    double discrepancy = 0.0;
};

struct GroupingOptions {
    int min_keypoints = 4;
    /// Candidates per keypoint index kept (highest score first) before
    /// enumerating assignments.
    int max_candidates_per_index = 3;
    /// Assignments with discrepancy at or below this value (meters) count as
    /// consistent and are ranked by assigned count before discrepancy.
    double discrepancy_tolerance = 0.01;
};

/// Greedy instance grouping. For every class, all assignments of at most one
/// candidate per keypoint index (with at least `min_keypoints` assigned) are
/// scored by their mean pairwise distance discrepancy against the CAD
/// keypoints and taken in ascending order (consistent assignments first, by
/// size), each candidate used at most once.
/// `model_keypoints[c]` holds the model keypoints of class c.
std::vector<InstanceGroup> group_instances(const KeypointSet& candidates,
                                           const std::vector<std::vector<Vec3>>& model_keypoints,
                                           const GroupingOptions& options = {});

struct DetectionOptions {
    GridSpec grid;
    int max_instances_per_class = 1;
    double peak_separation = 0.03;
    RefineOptions refine;
    /// Candidates lying more than this far (meters) in front of the measured
    /// depth at their own pixel, or projecting onto background away from any
    /// foreground, sit in observed free space and are dropped in favor of the
    /// next peak. Non-positive disables the test.
    double free_space_margin = 0.01;
    /// Extra peaks examined per keypoint when the free-space test is on.
    int spare_peaks = 2;
};

/// Runs voting per class over `class_raster` (pixel class ids, 0 for
/// background) and extracts candidate keypoints for every class present.
/// Keypoints are assumed to lie on the object surface, so a candidate in
/// front of the observed depth is taken to be the mirror image of the true
/// one across a visible face.
KeypointSet detect_keypoints(const RadialMapStack& radial, const DepthMap& depth, const Image<int>& class_raster,
                             const CameraIntrinsics& k, const DetectionOptions& options = {});

}  // namespace radpose
