#pragma once

#include <filesystem>
#include <vector>

#include "radpose/geometry.h"

namespace radpose {

/// ASCII OFF: "OFF", "<nv> <nf> <ne>", vertex lines, then "3 a b c" faces.
/// Polygonal faces with more than three vertices are fan-triangulated.
MeshModel read_off(const std::filesystem::path& path);
void write_off(const std::filesystem::path& path, const MeshModel& mesh);

/// Symmetry sidecar: JSON array of 4x4 row-major matrices.
std::vector<Pose> read_symmetries(const std::filesystem::path& path);
void write_symmetries(const std::filesystem::path& path, const std::vector<Pose>& symmetries);

/// Sidecar path for a mesh file: "obj.off" -> "obj.sym.json".
std::filesystem::path symmetry_sidecar(const std::filesystem::path& mesh_path);

/// Reads the mesh and, when present, its symmetry sidecar.
MeshModel load_mesh(const std::filesystem::path& path);
/// Writes the mesh and its symmetry sidecar.
void save_mesh(const std::filesystem::path& path, const MeshModel& mesh);

}  // namespace radpose
