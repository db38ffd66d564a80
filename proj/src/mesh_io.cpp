#include <fstream>
#include <iomanip>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>

#include "meshreg/errors.hpp"
#include "meshreg/mesh_gen.hpp"

namespace meshreg {

namespace {

std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream out(p);
    if (!out) throw IoError("cannot write " + p.string());
    out << std::setprecision(17);
    return out;
}

std::ifstream open_in(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw IoError("cannot open " + p.string());
    return in;
}

}  // namespace

void write_triangle_files(const TriMesh& mesh, const std::filesystem::path& node_path,
                          const std::filesystem::path& ele_path) {
    auto node = open_out(node_path);
    node << mesh.n_vertices() << '\n';
    for (std::size_t i = 0; i < mesh.n_vertices(); ++i)
        node << i << ' ' << mesh.vertex(i).x << ' ' << mesh.vertex(i).y << '\n';
    auto ele = open_out(ele_path);
    ele << mesh.n_triangles() << '\n';
    for (std::size_t t = 0; t < mesh.n_triangles(); ++t) {
        const Triangle& tri = mesh.triangle(t);
        ele << t << ' ' << tri[0] << ' ' << tri[1] << ' ' << tri[2] << '\n';
    }
    if (!node || !ele) throw IoError("failed writing mesh files");
}

TriMesh read_triangle_files(const std::filesystem::path& node_path,
                            const std::filesystem::path& ele_path) {
    auto node = open_in(node_path);
    std::size_t nv = 0;
    if (!(node >> nv)) throw IoError("malformed node file " + node_path.string());
    std::vector<Vec2> V(nv);
    for (std::size_t i = 0; i < nv; ++i) {
        std::size_t idx = 0;
        Vec2 p;
        if (!(node >> idx >> p.x >> p.y) || idx != i)
            throw IoError("malformed node line " + std::to_string(i) + " in " + node_path.string());
        V[i] = p;
    }
    auto ele = open_in(ele_path);
    std::size_t nt = 0;
    if (!(ele >> nt)) throw IoError("malformed ele file " + ele_path.string());
    std::vector<Triangle> T(nt);
    for (std::size_t t = 0; t < nt; ++t) {
        std::size_t idx = 0;
        Triangle tri{};
        if (!(ele >> idx >> tri[0] >> tri[1] >> tri[2]) || idx != t)
            throw IoError("malformed ele line " + std::to_string(t) + " in " + ele_path.string());
        T[t] = tri;
    }
    return TriMesh::build(std::move(V), std::move(T));
}

void write_mesh_json(const TriMesh& mesh, const std::filesystem::path& path) {
    nlohmann::json j;
    j["nodes"] = nlohmann::json::array();
    for (const Vec2& v : mesh.vertices()) j["nodes"].push_back({v.x, v.y});
    j["triangles"] = nlohmann::json::array();
    for (const Triangle& t : mesh.triangles()) j["triangles"].push_back({t[0], t[1], t[2]});
    auto out = open_out(path);
    out << j.dump() << '\n';
    if (!out) throw IoError("failed writing " + path.string());
}

TriMesh read_mesh_json(const std::filesystem::path& path) {
    auto in = open_in(path);
    nlohmann::json j;
    try {
        in >> j;
        std::vector<Vec2> V;
        for (const auto& n : j.at("nodes")) V.push_back({n.at(0).get<double>(), n.at(1).get<double>()});
        std::vector<Triangle> T;
        for (const auto& t : j.at("triangles"))
            T.push_back({t.at(0).get<Index>(), t.at(1).get<Index>(), t.at(2).get<Index>()});
        return TriMesh::build(std::move(V), std::move(T));
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed mesh JSON " + path.string() + ": " + e.what());
    }
}

TriMesh load_mesh(const std::filesystem::path& path) {
    const auto ext = path.extension().string();
    if (ext == ".json") return read_mesh_json(path);
    std::filesystem::path stem = path;
    if (ext == ".node" || ext == ".ele") stem.replace_extension();
    auto node = stem, ele = stem;
    node += ".node";
    ele += ".ele";
    return read_triangle_files(node, ele);
}

}  // namespace meshreg
