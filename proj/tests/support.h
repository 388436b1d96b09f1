#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "radpose/geometry.h"

namespace testing_support {

using radpose::Mat3;
using radpose::Pose;
using radpose::Vec3;

inline Mat3 random_rotation(std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
    q.normalize();
    return q.toRotationMatrix();
}

inline Vec3 random_vec(std::mt19937_64& rng, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    return {u(rng), u(rng), u(rng)};
}

/// Random pose in front of the camera at roughly `depth` meters.
inline Pose random_pose(std::mt19937_64& rng, double depth = 0.5, double spread = 0.05) {
    Pose p;
    p.rotation = random_rotation(rng);
    p.translation = random_vec(rng, -spread, spread) + Vec3(0.0, 0.0, depth);
    return p;
}

inline double rel_error(double a, double b) { return std::abs(a - b) / std::max({1e-12, std::abs(a), std::abs(b)}); }

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("radpose_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace testing_support

namespace testing_support {

struct ScheduleRow {
    int epoch = 0;
    double r = 0, k = 0, c = 0, s = 0, a = 0;
    bool frozen = true;
    std::string phase;
};

/// Parses the schedule golden CSV (header line first).
inline std::vector<ScheduleRow> read_schedule_golden(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open " + path);
    }
    std::vector<ScheduleRow> rows;
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        std::stringstream ss(line);
        std::vector<std::string> f;
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            f.push_back(cell);
        }
        if (f.size() != 8) {
            throw std::runtime_error("malformed golden row: " + line);
        }
        rows.push_back({std::stoi(f[0]), std::stod(f[1]), std::stod(f[2]), std::stod(f[3]), std::stod(f[4]),
                        std::stod(f[5]), f[6] == "1", f[7]});
    }
    return rows;
}

/// Relative path -> file bytes for every regular file under `root`.
inline std::map<std::string, std::string> read_tree(const std::filesystem::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
        if (!e.is_regular_file()) {
            continue;
        }
        std::ifstream in(e.path(), std::ios::binary);
        out[std::filesystem::relative(e.path(), root).generic_string()] =
            std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }
    return out;
}

}  // namespace testing_support
