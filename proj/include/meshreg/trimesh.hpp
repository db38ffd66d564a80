#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "meshreg/geometry.hpp"

namespace meshreg {

using Index = std::int32_t;
using Triangle = std::array<Index, 3>;

/// Triangle mesh with precomputed 1-ring connectivity.
///
/// Rings are stored sorted by vertex index. A vertex is on the boundary when
/// one of its edges belongs to exactly one triangle. Instances are immutable;
/// build() is the only way to obtain a populated mesh, so connectivity can
/// never drift from the triangle list.
class TriMesh {
public:
    TriMesh() = default;

    /// Validates (V, T) and derives rings, incident triangles, valences and
    /// boundary flags. Throws GeometryError for out-of-range indices, repeated
    /// indices within a triangle, or |signed area| <= 1e-9.
    static TriMesh build(std::vector<Vec2> vertices, std::vector<Triangle> triangles);

    std::size_t n_vertices() const { return vertices_.size(); }
    std::size_t n_triangles() const { return triangles_.size(); }
    std::size_t n_edges() const { return n_edges_; }

    const std::vector<Vec2>& vertices() const { return vertices_; }
    const std::vector<Triangle>& triangles() const { return triangles_; }
    const Vec2& vertex(std::size_t i) const { return vertices_[i]; }
    const Triangle& triangle(std::size_t t) const { return triangles_[t]; }

    std::span<const Index> ring(std::size_t i) const {
        return {ring_idx_.data() + ring_off_[i], ring_idx_.data() + ring_off_[i + 1]};
    }
    std::span<const Index> incident(std::size_t i) const {
        return {inc_idx_.data() + inc_off_[i], inc_idx_.data() + inc_off_[i + 1]};
    }
    std::size_t valence(std::size_t i) const { return ring_off_[i + 1] - ring_off_[i]; }
    bool is_boundary(std::size_t i) const { return boundary_[i] != 0; }

    /// Smallest signed triangle area (positive for an all-CCW mesh).
    double min_signed_area() const;

    friend bool operator==(const TriMesh&, const TriMesh&) = default;

private:
    std::vector<Vec2> vertices_;
    std::vector<Triangle> triangles_;
    std::vector<std::size_t> ring_off_{0};
    std::vector<Index> ring_idx_;
    std::vector<std::size_t> inc_off_{0};
    std::vector<Index> inc_idx_;
    std::vector<std::uint8_t> boundary_;
    std::size_t n_edges_ = 0;
};

/// Convenience alias matching the build step's role in the solver setup.
inline TriMesh build_adjacency(std::vector<Vec2> vertices, std::vector<Triangle> triangles) {
    return TriMesh::build(std::move(vertices), std::move(triangles));
}

/// Per-triangle areas and edge vectors. For triangle (i, j, k) the edges are
/// stored as {V_j - V_i, V_k - V_j, V_i - V_k}.
struct TriangleGeometry {
    std::vector<double> areas;
    std::vector<std::array<Vec2, 3>> edges;
};

TriangleGeometry compute_geometry(const TriMesh& mesh);

/// True when freshly recomputed areas match the cached ones to 1e-12 relative.
bool geometry_matches(const TriMesh& mesh, const TriangleGeometry& geom);

/// Gradient of the linear interpolant of (f_i, f_j, f_k) over a triangle,
/// written in terms of the edge dot products. Throws GeometryError if the
/// area is not positive.
Vec2 triangle_gradient(const std::array<Vec2, 3>& edges, double area,
                       const std::array<double, 3>& f);
Vec2 triangle_gradient(const TriMesh& mesh, const TriangleGeometry& geom, std::size_t tri,
                       std::span<const double> f);

/// Area-weighted average of the gradients of the triangles incident to i.
Vec2 vertex_gradient(const TriMesh& mesh, const TriangleGeometry& geom,
                     std::span<const double> f, std::size_t i);

/// vertex_gradient for every vertex, sharing the per-triangle work.
std::vector<Vec2> vertex_gradients(const TriMesh& mesh, const TriangleGeometry& geom,
                                   std::span<const double> f);

/// Umbrella operator: mean of the 1-ring values minus the center value.
Vec2 umbrella(const TriMesh& mesh, std::span<const Vec2> u, std::size_t i);

/// Row-compressed umbrella averaging matrix with entries 1/m_i on the 1-ring.
class LaplacianMatrix {
public:
    LaplacianMatrix() = default;
    LaplacianMatrix(std::vector<std::size_t> row_ptr, std::vector<Index> cols,
                    std::vector<double> values);

    std::size_t size() const { return row_ptr_.size() - 1; }
    std::span<const Index> row_cols(std::size_t i) const {
        return {cols_.data() + row_ptr_[i], cols_.data() + row_ptr_[i + 1]};
    }
    std::span<const double> row_values(std::size_t i) const {
        return {values_.data() + row_ptr_[i], values_.data() + row_ptr_[i + 1]};
    }
    /// Entry (i, j), zero outside the sparsity pattern.
    double coeff(std::size_t i, std::size_t j) const;

    /// A * u.
    std::vector<Vec2> apply(std::span<const Vec2> u) const;
    /// (A - I) * u, i.e. the umbrella operator at every vertex.
    std::vector<Vec2> apply_laplacian(std::span<const Vec2> u) const;
    /// ((1 - lambda) I + lambda A) * u.
    std::vector<Vec2> apply_smoothing(std::span<const Vec2> u, double lambda) const;

private:
    std::vector<std::size_t> row_ptr_{0};
    std::vector<Index> cols_;
    std::vector<double> values_;
};

/// Throws GeometryError if any vertex has an empty ring.
LaplacianMatrix build_laplacian(const TriMesh& mesh);

/// Applies ((1 - lambda) I + lambda A)^iterations to u0. Throws ConfigError
/// unless 0 < lambda < 1.
std::vector<Vec2> smooth_displacement(const LaplacianMatrix& L, std::span<const Vec2> u0,
                                      double lambda, std::size_t iterations);

}  // namespace meshreg
