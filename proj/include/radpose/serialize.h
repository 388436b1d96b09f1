#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"
#include "radpose/geometry.h"
#include "radpose/rkhs.h"
#include "radpose/synth.h"
#include "radpose/voting.h"

namespace radpose {

/// Throws IoError when the file is missing or not valid JSON.
nlohmann::json read_json(const std::filesystem::path& path);
/// Two-space indented, trailing newline. Throws IoError on write failure.
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

void write_text(const std::filesystem::path& path, const std::string& text);

/// Poses are 4x4 row-major nested arrays.
nlohmann::json to_json(const Pose& pose);
/// Throws DomainError unless the matrix is a rigid transform within 1e-6.
Pose pose_from_json(const nlohmann::json& j);

nlohmann::json to_json(const std::vector<Pose>& poses);
std::vector<Pose> poses_from_json(const nlohmann::json& j);

nlohmann::json to_json(const CameraIntrinsics& k);
CameraIntrinsics intrinsics_from_json(const nlohmann::json& j);

nlohmann::json to_json(const std::vector<Vec3>& points);
std::vector<Vec3> points3_from_json(const nlohmann::json& j);
nlohmann::json to_json(const std::vector<Vec2>& points);
std::vector<Vec2> points2_from_json(const nlohmann::json& j);

/// Instance labels without the mask raster.
nlohmann::json to_json(const LabelSet& labels);
LabelSet labels_from_json(const nlohmann::json& j);

/// Array of {kp2d, kp3d, class_id, score, kp_index}.
nlohmann::json to_json(const KeypointSet& keypoints);
KeypointSet keypoints_from_json(const nlohmann::json& j);

/// Dense matrix as an array of rows.
nlohmann::json to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j);

nlohmann::json to_json(const rkhs::KernelWeights& w);
rkhs::KernelWeights kernel_weights_from_json(const nlohmann::json& j);

}  // namespace radpose
