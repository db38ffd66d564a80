#include "meshreg/trimesh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "meshreg/errors.hpp"

namespace meshreg {

namespace {

constexpr double kMinArea = 1e-9;

}  // namespace

TriMesh TriMesh::build(std::vector<Vec2> vertices, std::vector<Triangle> triangles) {
    const auto nv = static_cast<Index>(vertices.size());
    for (const Vec2& v : vertices)
        if (!std::isfinite(v.x) || !std::isfinite(v.y))
            throw GeometryError("mesh vertex has non-finite coordinate");

    std::vector<std::pair<Index, Index>> edges;
    edges.reserve(triangles.size() * 3);
    for (std::size_t t = 0; t < triangles.size(); ++t) {
        const Triangle& tri = triangles[t];
        for (Index v : tri)
            if (v < 0 || v >= nv)
                throw GeometryError("triangle " + std::to_string(t) + " has out-of-range index");
        if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2])
            throw GeometryError("triangle " + std::to_string(t) + " repeats a vertex");
        const double a = signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
        if (!(std::abs(a) > kMinArea))
            throw GeometryError("triangle " + std::to_string(t) + " is degenerate");
        for (int k = 0; k < 3; ++k) {
            const Index a0 = tri[k], a1 = tri[(k + 1) % 3];
            edges.emplace_back(std::min(a0, a1), std::max(a0, a1));
        }
    }
    std::sort(edges.begin(), edges.end());

    TriMesh m;
    m.vertices_ = std::move(vertices);
    m.triangles_ = std::move(triangles);
    m.boundary_.assign(nv, 0);

    std::vector<std::vector<Index>> rings(nv);
    for (std::size_t e = 0; e < edges.size();) {
        std::size_t run = e;
        while (run < edges.size() && edges[run] == edges[e]) ++run;
        const auto [a, b] = edges[e];
        rings[a].push_back(b);
        rings[b].push_back(a);
        if (run - e == 1) {
            m.boundary_[a] = 1;
            m.boundary_[b] = 1;
        }
        ++m.n_edges_;
        e = run;
    }

    std::vector<std::vector<Index>> inc(nv);
    for (std::size_t t = 0; t < m.triangles_.size(); ++t)
        for (Index v : m.triangles_[t]) inc[v].push_back(static_cast<Index>(t));

    m.ring_off_.assign(1, 0);
    m.inc_off_.assign(1, 0);
    for (Index i = 0; i < nv; ++i) {
        std::sort(rings[i].begin(), rings[i].end());
        m.ring_idx_.insert(m.ring_idx_.end(), rings[i].begin(), rings[i].end());
        m.ring_off_.push_back(m.ring_idx_.size());
        m.inc_idx_.insert(m.inc_idx_.end(), inc[i].begin(), inc[i].end());
        m.inc_off_.push_back(m.inc_idx_.size());
    }
    return m;
}

double TriMesh::min_signed_area() const {
    double lo = std::numeric_limits<double>::infinity();
    for (const Triangle& t : triangles_)
        lo = std::min(lo, signed_area(vertices_[t[0]], vertices_[t[1]], vertices_[t[2]]));
    return lo;
}

TriangleGeometry compute_geometry(const TriMesh& mesh) {
    TriangleGeometry g;
    g.areas.reserve(mesh.n_triangles());
    g.edges.reserve(mesh.n_triangles());
    for (const Triangle& t : mesh.triangles()) {
        const Vec2& vi = mesh.vertex(t[0]);
        const Vec2& vj = mesh.vertex(t[1]);
        const Vec2& vk = mesh.vertex(t[2]);
        g.areas.push_back(std::abs(signed_area(vi, vj, vk)));
        g.edges.push_back({vj - vi, vk - vj, vi - vk});
    }
    return g;
}

bool geometry_matches(const TriMesh& mesh, const TriangleGeometry& geom) {
    if (geom.areas.size() != mesh.n_triangles()) return false;
    const TriangleGeometry fresh = compute_geometry(mesh);
    for (std::size_t t = 0; t < fresh.areas.size(); ++t)
        if (std::abs(fresh.areas[t] - geom.areas[t]) > 1e-12 * fresh.areas[t]) return false;
    return true;
}

Vec2 triangle_gradient(const std::array<Vec2, 3>& edges, double area,
                       const std::array<double, 3>& f) {
    if (!(area > 0.0)) throw GeometryError("triangle_gradient: non-positive area");
    // The two terms of each vertex coefficient nearly cancel on slivers, so
    // they are formed in extended precision.
    using Real = long double;
    struct V {
        Real x, y;
    };
    auto dotl = [](const V& a, const V& b) { return a.x * b.x + a.y * b.y; };
    auto neg = [](const V& a) { return V{-a.x, -a.y}; };
    // Directed edge vectors of triangle (i, j, k).
    const V vij{edges[0].x, edges[0].y}, vjk{edges[1].x, edges[1].y}, vki{edges[2].x, edges[2].y};
    const V vji = neg(vij), vkj = neg(vjk), vik = neg(vki);

    const Real aj = dotl(vji, vik), bj = dotl(vjk, vki);
    const Real ak = dotl(vkj, vji), bk = dotl(vki, vij);
    const V gj{aj * vjk.x + bj * vji.x, aj * vjk.y + bj * vji.y};
    const V gk{ak * vki.x + bk * vkj.x, ak * vki.y + bk * vkj.y};

    // gi + gj + gk = 0, so f_i only enters through the differences.
    const Real scale = 1.0L / (4.0L * Real(area) * Real(area));
    const Real dj = Real(f[1]) - f[0], dk = Real(f[2]) - f[0];
    return {static_cast<double>((dj * gj.x + dk * gk.x) * scale),
            static_cast<double>((dj * gj.y + dk * gk.y) * scale)};
}

Vec2 triangle_gradient(const TriMesh& mesh, const TriangleGeometry& geom, std::size_t tri,
                       std::span<const double> f) {
    const Triangle& t = mesh.triangle(tri);
    return triangle_gradient(geom.edges[tri], geom.areas[tri], {f[t[0]], f[t[1]], f[t[2]]});
}

Vec2 vertex_gradient(const TriMesh& mesh, const TriangleGeometry& geom,
                     std::span<const double> f, std::size_t i) {
    const auto inc = mesh.incident(i);
    if (inc.empty()) throw GeometryError("vertex_gradient: vertex has no incident triangle");
    Vec2 acc;
    double total = 0.0;
    for (Index t : inc) {
        acc += geom.areas[t] * triangle_gradient(mesh, geom, t, f);
        total += geom.areas[t];
    }
    return acc * (1.0 / total);
}

std::vector<Vec2> vertex_gradients(const TriMesh& mesh, const TriangleGeometry& geom,
                                   std::span<const double> f) {
    std::vector<Vec2> acc(mesh.n_vertices());
    std::vector<double> total(mesh.n_vertices(), 0.0);
    for (std::size_t t = 0; t < mesh.n_triangles(); ++t) {
        const Vec2 g = geom.areas[t] * triangle_gradient(mesh, geom, t, f);
        for (Index v : mesh.triangle(t)) {
            acc[v] += g;
            total[v] += geom.areas[t];
        }
    }
    for (std::size_t i = 0; i < acc.size(); ++i) {
        if (total[i] <= 0.0)
            throw GeometryError("vertex_gradients: vertex has no incident triangle");
        acc[i] *= 1.0 / total[i];
    }
    return acc;
}

Vec2 umbrella(const TriMesh& mesh, std::span<const Vec2> u, std::size_t i) {
    const auto ring = mesh.ring(i);
    if (ring.empty()) throw GeometryError("umbrella: isolated vertex");
    Vec2 mean;
    for (Index j : ring) mean += u[j];
    mean *= 1.0 / static_cast<double>(ring.size());
    return mean - u[i];
}

LaplacianMatrix::LaplacianMatrix(std::vector<std::size_t> row_ptr, std::vector<Index> cols,
                                 std::vector<double> values)
    : row_ptr_(std::move(row_ptr)), cols_(std::move(cols)), values_(std::move(values)) {
    if (row_ptr_.empty() || row_ptr_.back() != cols_.size() || cols_.size() != values_.size())
        throw GeometryError("LaplacianMatrix: inconsistent CSR arrays");
}

double LaplacianMatrix::coeff(std::size_t i, std::size_t j) const {
    const auto cols = row_cols(i);
    const auto it = std::lower_bound(cols.begin(), cols.end(), static_cast<Index>(j));
    if (it == cols.end() || *it != static_cast<Index>(j)) return 0.0;
    return row_values(i)[static_cast<std::size_t>(it - cols.begin())];
}

std::vector<Vec2> LaplacianMatrix::apply(std::span<const Vec2> u) const {
    std::vector<Vec2> out(size());
    for (std::size_t i = 0; i < size(); ++i) {
        Vec2 acc;
        for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) acc += values_[k] * u[cols_[k]];
        out[i] = acc;
    }
    return out;
}

std::vector<Vec2> LaplacianMatrix::apply_laplacian(std::span<const Vec2> u) const {
    auto out = apply(u);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= u[i];
    return out;
}

std::vector<Vec2> LaplacianMatrix::apply_smoothing(std::span<const Vec2> u, double lambda) const {
    auto out = apply(u);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (1.0 - lambda) * u[i] + lambda * out[i];
    return out;
}

LaplacianMatrix build_laplacian(const TriMesh& mesh) {
    std::vector<std::size_t> row_ptr{0};
    std::vector<Index> cols;
    std::vector<double> values;
    for (std::size_t i = 0; i < mesh.n_vertices(); ++i) {
        const auto ring = mesh.ring(i);
        if (ring.empty())
            throw GeometryError("build_laplacian: vertex " + std::to_string(i) + " is isolated");
        const double w = 1.0 / static_cast<double>(ring.size());
        for (Index j : ring) {
            cols.push_back(j);
            values.push_back(w);
        }
        row_ptr.push_back(cols.size());
    }
    return LaplacianMatrix(std::move(row_ptr), std::move(cols), std::move(values));
}

std::vector<Vec2> smooth_displacement(const LaplacianMatrix& L, std::span<const Vec2> u0,
                                      double lambda, std::size_t iterations) {
    if (!(lambda > 0.0 && lambda < 1.0))
        throw ConfigError("smoothing weight lambda must lie in (0, 1)");
    std::vector<Vec2> u(u0.begin(), u0.end());
    for (std::size_t k = 0; k < iterations; ++k) u = L.apply_smoothing(u, lambda);
    return u;
}

}  // namespace meshreg
