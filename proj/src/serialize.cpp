#include "radpose/serialize.h"

#include <fstream>

#include "radpose/errors.h"

namespace radpose {

using nlohmann::json;

json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw IoError("invalid JSON in " + path.string() + ": " + e.what());
    }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out << text;
    if (!out) {
        throw IoError("write failed for " + path.string());
    }
}

void write_json(const std::filesystem::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

namespace {

double number(const json& j) {
    if (!j.is_number()) {
        throw DomainError("expected a number, got " + j.dump());
    }
    return j.get<double>();
}

void require_array(const json& j, std::size_t n, const char* what) {
    if (!j.is_array() || (n != 0 && j.size() != n)) {
        throw DomainError(std::string("malformed ") + what);
    }
}

template <typename T>
T field(const json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) {
        throw DomainError(std::string("missing field '") + key + "'");
    }
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw DomainError(std::string("wrong type for field '") + key + "'");
    }
}

}  // namespace

json to_json(const Pose& pose) {
    const Mat4 m = pose.matrix();
    json rows = json::array();
    for (int r = 0; r < 4; ++r) {
        rows.push_back({m(r, 0), m(r, 1), m(r, 2), m(r, 3)});
    }
    return rows;
}

Pose pose_from_json(const json& j) {
    require_array(j, 4, "pose matrix");
    Mat4 m;
    for (int r = 0; r < 4; ++r) {
        require_array(j[r], 4, "pose matrix row");
        for (int c = 0; c < 4; ++c) {
            m(r, c) = number(j[r][c]);
        }
    }
    const Pose p = Pose::from_matrix(m);
    if (!p.is_valid(1e-6)) {
        throw DomainError("pose matrix is not a rigid transform");
    }
    return p;
}

json to_json(const std::vector<Pose>& poses) {
    json out = json::array();
    for (const auto& p : poses) {
        out.push_back(to_json(p));
    }
    return out;
}

std::vector<Pose> poses_from_json(const json& j) {
    require_array(j, 0, "pose list");
    std::vector<Pose> out;
    for (const auto& p : j) {
        out.push_back(pose_from_json(p));
    }
    return out;
}

json to_json(const CameraIntrinsics& k) {
    return {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}, {"width", k.width}, {"height", k.height}};
}

CameraIntrinsics intrinsics_from_json(const json& j) {
    CameraIntrinsics k;
    k.fx = field<double>(j, "fx");
    k.fy = field<double>(j, "fy");
    k.cx = field<double>(j, "cx");
    k.cy = field<double>(j, "cy");
    k.width = field<int>(j, "width");
    k.height = field<int>(j, "height");
    k.validate();
    return k;
}

json to_json(const std::vector<Vec3>& points) {
    json out = json::array();
    for (const auto& p : points) {
        out.push_back({p.x(), p.y(), p.z()});
    }
    return out;
}

std::vector<Vec3> points3_from_json(const json& j) {
    require_array(j, 0, "3D point list");
    std::vector<Vec3> out;
    for (const auto& p : j) {
        require_array(p, 3, "3D point");
        out.emplace_back(number(p[0]), number(p[1]), number(p[2]));
    }
    return out;
}

json to_json(const std::vector<Vec2>& points) {
    json out = json::array();
    for (const auto& p : points) {
        out.push_back({p.x(), p.y()});
    }
    return out;
}

std::vector<Vec2> points2_from_json(const json& j) {
    require_array(j, 0, "2D point list");
    std::vector<Vec2> out;
    for (const auto& p : j) {
        require_array(p, 2, "2D point");
        out.emplace_back(number(p[0]), number(p[1]));
    }
    return out;
}

json to_json(const LabelSet& labels) {
    json instances = json::array();
    for (const auto& inst : labels.instances) {
        instances.push_back({{"instance_id", inst.instance_id},
                             {"class_id", inst.class_id},
                             {"pose", to_json(inst.pose)},
                             {"keypoints3d", to_json(inst.keypoints3d)},
                             {"keypoints2d", to_json(inst.keypoints2d)}});
    }
    return {{"instances", instances}};
}

LabelSet labels_from_json(const json& j) {
    LabelSet out;
    const json instances = field<json>(j, "instances");
    require_array(instances, 0, "instance list");
    for (const auto& inst : instances) {
        InstanceLabel l;
        l.instance_id = field<int>(inst, "instance_id");
        l.class_id = field<int>(inst, "class_id");
        l.pose = pose_from_json(field<json>(inst, "pose"));
        l.keypoints3d = points3_from_json(field<json>(inst, "keypoints3d"));
        l.keypoints2d = points2_from_json(field<json>(inst, "keypoints2d"));
        out.instances.push_back(std::move(l));
    }
    return out;
}

json to_json(const KeypointSet& keypoints) {
    json out = json::array();
    for (const auto& e : keypoints.entries) {
        out.push_back({{"kp2d", {e.kp2d.x(), e.kp2d.y()}},
                       {"kp3d", {e.kp3d.x(), e.kp3d.y(), e.kp3d.z()}},
                       {"class_id", e.class_id},
                       {"score", e.score},
                       {"kp_index", e.keypoint_index}});
    }
    return out;
}

KeypointSet keypoints_from_json(const json& j) {
    require_array(j, 0, "keypoint set");
    KeypointSet out;
    for (const auto& item : j) {
        KeypointEntry e;
        const json kp2d = field<json>(item, "kp2d");
        const json kp3d = field<json>(item, "kp3d");
        require_array(kp2d, 2, "kp2d");
        require_array(kp3d, 3, "kp3d");
        e.kp2d = Vec2(number(kp2d[0]), number(kp2d[1]));
        e.kp3d = Vec3(number(kp3d[0]), number(kp3d[1]), number(kp3d[2]));
        e.class_id = field<int>(item, "class_id");
        e.score = field<double>(item, "score");
        e.keypoint_index = item.contains("kp_index") ? field<int>(item, "kp_index") : 0;
        out.entries.push_back(e);
    }
    return out;
}

json to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            row.push_back(m(r, c));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
    require_array(j, 0, "matrix");
    if (j.empty()) {
        return {};
    }
    const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
    Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < j.size(); ++r) {
        require_array(j[r], cols, "matrix row");
        for (std::size_t c = 0; c < cols; ++c) {
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = number(j[r][c]);
        }
    }
    return m;
}

json to_json(const rkhs::KernelWeights& w) { return {{"wx", to_json(w.wx)}, {"wy", to_json(w.wy)}}; }

rkhs::KernelWeights kernel_weights_from_json(const json& j) {
    return {matrix_from_json(field<json>(j, "wx")), matrix_from_json(field<json>(j, "wy"))};
}

}  // namespace radpose
