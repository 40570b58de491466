#include "style3d/mesh/export.hpp"

#include "style3d/error.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <cstring>
#include <fstream>
#include <sstream>

namespace style3d::mesh {
namespace {

void write_bytes(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ValidationError("failed writing " + path.string());
}

template <typename T>
void append_le(std::string& buf, T v) {
  char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));  // little-endian hosts only
  buf.append(b, sizeof(T));
}

}  // namespace

std::string to_obj(const MeshResult& mesh) {
  std::string out;
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const Vec3& v = mesh.vertices[i];
    const Vec3 c = i < mesh.colors.size() ? mesh.colors[i] : Vec3(0.5, 0.5, 0.5);
    out += fmt::format("v {:.6f} {:.6f} {:.6f} {:.6f} {:.6f} {:.6f}\n", v.x(), v.y(), v.z(), c.x(), c.y(), c.z());
  }
  for (const auto& f : mesh.faces) out += fmt::format("f {} {} {}\n", f[0] + 1, f[1] + 1, f[2] + 1);
  return out;
}

void write_obj(const std::filesystem::path& path, const MeshResult& mesh) { write_bytes(path, to_obj(mesh)); }

std::string to_glb(const MeshResult& mesh) {
  using nlohmann::json;
  json doc;
  doc["asset"] = {{"version", "2.0"}, {"generator", "style3d"}};
  doc["scene"] = 0;
  std::string bin;

  if (mesh.empty()) {
    doc["scenes"] = json::array({json{{"nodes", json::array()}}});
  } else {
    const std::size_t nv = mesh.vertices.size(), nf = mesh.faces.size();
    Eigen::Vector3f lo = Eigen::Vector3f::Constant(std::numeric_limits<float>::max());
    Eigen::Vector3f hi = -lo;
    for (const Vec3& v : mesh.vertices) {
      const Eigen::Vector3f f = v.cast<float>();
      lo = lo.cwiseMin(f);
      hi = hi.cwiseMax(f);
      for (int k = 0; k < 3; ++k) append_le<float>(bin, f[k]);
    }
    for (std::size_t i = 0; i < nv; ++i) {
      const Vec3 c = i < mesh.colors.size() ? mesh.colors[i] : Vec3(0.5, 0.5, 0.5);
      for (int k = 0; k < 3; ++k) append_le<float>(bin, static_cast<float>(c[k]));
    }
    for (const auto& f : mesh.faces)
      for (int k = 0; k < 3; ++k) append_le<std::uint32_t>(bin, static_cast<std::uint32_t>(f[k]));

    const std::size_t vbytes = nv * 12, ibytes = nf * 12;
    doc["buffers"] = json::array({{{"byteLength", bin.size()}}});
    doc["bufferViews"] = json::array({
        {{"buffer", 0}, {"byteOffset", 0}, {"byteLength", vbytes}, {"target", 34962}},
        {{"buffer", 0}, {"byteOffset", vbytes}, {"byteLength", vbytes}, {"target", 34962}},
        {{"buffer", 0}, {"byteOffset", 2 * vbytes}, {"byteLength", ibytes}, {"target", 34963}},
    });
    doc["accessors"] = json::array({
        {{"bufferView", 0},
         {"componentType", 5126},
         {"count", nv},
         {"type", "VEC3"},
         {"min", {lo[0], lo[1], lo[2]}},
         {"max", {hi[0], hi[1], hi[2]}}},
        {{"bufferView", 1}, {"componentType", 5126}, {"count", nv}, {"type", "VEC3"}},
        {{"bufferView", 2}, {"componentType", 5125}, {"count", nf * 3}, {"type", "SCALAR"}},
    });
    doc["meshes"] = json::array(
        {{{"primitives", json::array({{{"attributes", {{"POSITION", 0}, {"COLOR_0", 1}}}, {"indices", 2}}})}}});
    doc["nodes"] = json::array({{{"mesh", 0}}});
    doc["scenes"] = json::array({{{"nodes", {0}}}});
  }

  std::string js = doc.dump();
  while (js.size() % 4) js.push_back(' ');
  while (bin.size() % 4) bin.push_back('\0');

  std::string out;
  const std::uint32_t total = 12 + 8 + static_cast<std::uint32_t>(js.size()) + (bin.empty() ? 0 : 8 + static_cast<std::uint32_t>(bin.size()));
  append_le<std::uint32_t>(out, 0x46546C67);  // "glTF"
  append_le<std::uint32_t>(out, 2);
  append_le<std::uint32_t>(out, total);
  append_le<std::uint32_t>(out, static_cast<std::uint32_t>(js.size()));
  append_le<std::uint32_t>(out, 0x4E4F534A);  // "JSON"
  out += js;
  if (!bin.empty()) {
    append_le<std::uint32_t>(out, static_cast<std::uint32_t>(bin.size()));
    append_le<std::uint32_t>(out, 0x004E4942);  // "BIN\0"
    out += bin;
  }
  return out;
}

void write_glb(const std::filesystem::path& path, const MeshResult& mesh) { write_bytes(path, to_glb(mesh)); }

MeshResult read_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  MeshResult mesh;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "v") {
      Vec3 p, c(0.5, 0.5, 0.5);
      ls >> p.x() >> p.y() >> p.z();
      if (!ls) throw ValidationError("malformed vertex line in " + path.string());
      double r, g, b;
      if (ls >> r >> g >> b) c = Vec3(r, g, b);
      mesh.vertices.push_back(p);
      mesh.colors.push_back(c);
    } else if (tag == "f") {
      std::array<int, 3> f;
      ls >> f[0] >> f[1] >> f[2];
      if (!ls) throw ValidationError("malformed face line in " + path.string());
      for (int& i : f) --i;
      mesh.faces.push_back(f);
    }
  }
  return mesh;
}

}  // namespace style3d::mesh
