#pragma once

#include "style3d/mesh/mesh.hpp"

#include <filesystem>
#include <string>

namespace style3d::mesh {

// "v x y z r g b" lines followed by 1-based "f a b c" lines.
std::string to_obj(const MeshResult& mesh);
void write_obj(const std::filesystem::path& path, const MeshResult& mesh);

// Binary glTF 2.0 with POSITION, COLOR_0 and uint32 indices.
std::string to_glb(const MeshResult& mesh);
void write_glb(const std::filesystem::path& path, const MeshResult& mesh);

// Minimal OBJ reader for the files write_obj produces.
MeshResult read_obj(const std::filesystem::path& path);

}  // namespace style3d::mesh
