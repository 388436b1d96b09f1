#include "radpose/mesh_io.h"

#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "radpose/errors.h"
#include "radpose/serialize.h"

namespace radpose {

namespace fs = std::filesystem;

namespace {

// Next non-empty, non-comment line.
bool next_line(std::istream& in, std::string& line) {
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line.erase(hash);
        }
        if (line.find_first_not_of(" \t\r") != std::string::npos) {
            return true;
        }
    }
    return false;
}

}  // namespace

MeshModel read_off(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open mesh file " + path.string());
    }
    std::string line;
    if (!next_line(in, line) || line.substr(0, 3) != "OFF") {
        throw IoError(path.string() + ": missing OFF header");
    }
    std::string counts = line.substr(3);
    if (counts.find_first_not_of(" \t\r") == std::string::npos && !next_line(in, counts)) {
        throw IoError(path.string() + ": missing counts line");
    }
    std::istringstream cs(counts);
    long nv = -1, nf = -1;
    if (!(cs >> nv >> nf) || nv < 0 || nf < 0) {
        throw IoError(path.string() + ": malformed counts line");
    }

    std::vector<Vec3> vertices;
    vertices.reserve(static_cast<std::size_t>(nv));
    for (long i = 0; i < nv; ++i) {
        if (!next_line(in, line)) {
            throw IoError(path.string() + ": truncated vertex list");
        }
        std::istringstream ls(line);
        Vec3 p;
        if (!(ls >> p.x() >> p.y() >> p.z())) {
            throw IoError(path.string() + ": malformed vertex line " + std::to_string(i));
        }
        vertices.push_back(p);
    }
    std::vector<Face> faces;
    for (long i = 0; i < nf; ++i) {
        if (!next_line(in, line)) {
            throw IoError(path.string() + ": truncated face list");
        }
        std::istringstream ls(line);
        int k = 0;
        if (!(ls >> k) || k < 3) {
            throw IoError(path.string() + ": malformed face line " + std::to_string(i));
        }
        std::vector<int> idx(static_cast<std::size_t>(k));
        for (auto& id : idx) {
            if (!(ls >> id)) {
                throw IoError(path.string() + ": malformed face line " + std::to_string(i));
            }
        }
        for (int j = 1; j + 1 < k; ++j) {
            faces.push_back({idx[0], idx[j], idx[j + 1]});
        }
    }
    try {
        return make_mesh(std::move(vertices), std::move(faces));
    } catch (const DomainError& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

void write_off(const fs::path& path, const MeshModel& mesh) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write mesh file " + path.string());
    }
    out.precision(17);
    out << "OFF\n" << mesh.vertices.size() << ' ' << mesh.faces.size() << " 0\n";
    for (const auto& v : mesh.vertices) {
        out << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
    }
    for (const auto& f : mesh.faces) {
        out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
    }
    if (!out) {
        throw IoError("failed writing " + path.string());
    }
}

std::vector<Pose> read_symmetries(const fs::path& path) {
    const nlohmann::json j = read_json(path);
    if (!j.is_array()) {
        throw IoError(path.string() + ": symmetry file must hold a JSON array");
    }
    std::vector<Pose> out;
    for (const auto& m : j) {
        out.push_back(pose_from_json(m));
    }
    return out;
}

void write_symmetries(const fs::path& path, const std::vector<Pose>& symmetries) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& s : symmetries) {
        j.push_back(to_json(s));
    }
    write_json(path, j);
}

fs::path symmetry_sidecar(const fs::path& mesh_path) {
    fs::path p = mesh_path;
    p.replace_extension(".sym.json");
    return p;
}

MeshModel load_mesh(const fs::path& path) {
    MeshModel mesh = read_off(path);
    const fs::path sidecar = symmetry_sidecar(path);
    if (fs::exists(sidecar)) {
        try {
            mesh = make_mesh(std::move(mesh.vertices), std::move(mesh.faces), read_symmetries(sidecar));
        } catch (const DomainError& e) {
            throw IoError(sidecar.string() + ": " + e.what());
        }
    }
    return mesh;
}

void save_mesh(const fs::path& path, const MeshModel& mesh) {
    write_off(path, mesh);
    write_symmetries(symmetry_sidecar(path), mesh.symmetries);
}

}  // namespace radpose
