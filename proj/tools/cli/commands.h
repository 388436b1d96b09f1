#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace radpose::cli {

namespace fs = std::filesystem;

struct Globals {
    std::uint64_t seed = 0;
    int threads = 1;
};

struct GenDataOptions {
    fs::path out;
    int scenes = 10;
    int objects_per_scene = 1;
    int keypoints = 4;
};

struct VoteOptions {
    fs::path radial;
    fs::path depth;
    fs::path intrinsics;
    /// Optional class raster; without it every foreground pixel is class 1.
    fs::path classes;
    fs::path out;
    double voxel = 0.005;
    int max_instances = 1;
    double peak_separation = 0.03;
};

struct EstimateOptions {
    fs::path keypoints;
    fs::path models;
    fs::path intrinsics;
    fs::path out;
    int min_keypoints = 4;
    double discrepancy_tolerance = 0.01;
    bool icp = false;
    fs::path depth;
    fs::path classes;
};

struct EvalOptions {
    fs::path gt;
    fs::path est;
    std::vector<fs::path> meshes;
    /// Model file resolving meshes by class id; overrides `meshes`.
    fs::path models;
    fs::path intrinsics;
    fs::path out;
    std::vector<std::string> metrics{"add", "adds", "auc", "mssd", "mspd", "vsd", "ar"};
    double auc_max = 0.1;
    int auc_steps = 100;
    double fraction = 0.1;
    double vsd_delta = 0.015;
};

struct MmdFitOptions {
    fs::path source;
    fs::path target;
    fs::path out;
    std::string kernel = "linear";
    std::string estimator = "paper";
    std::string objective = "minimize";
    std::string scale = "m2";
    int epochs = 200;
    double lr = 1e-2;
    double rbf_w = 1.0;
    int lift = 1;
    int projections = 64;
};

struct PipelineOptions {
    fs::path out;
    int scenes = 10;
    int keypoints = 4;
    int batch_size = 8;
    double corruption_sigma = 0.0;
    double dropout = 0.0;
    double voxel = 0.005;
    bool icp = false;
    bool write_composites = false;
};

void gen_data(const GenDataOptions& o, const Globals& g);
void vote(const VoteOptions& o, const Globals& g);
void estimate(const EstimateOptions& o, const Globals& g);
void eval(const EvalOptions& o, const Globals& g);
void mmd_fit(const MmdFitOptions& o, const Globals& g);
void pipeline(const PipelineOptions& o, const Globals& g);

/// Seed of stream `index` derived from a base seed (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace radpose::cli
