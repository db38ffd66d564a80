#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "meshreg/image.hpp"
#include "meshreg/trimesh.hpp"

namespace meshreg {

/// Per-pixel displacement planes.
struct DenseField {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<double> ux;
    std::vector<double> uy;

    DenseField() = default;
    DenseField(std::size_t w, std::size_t h) : width(w), height(h), ux(w * h, 0.0), uy(w * h, 0.0) {}

    Vec2 at(std::size_t x, std::size_t y) const { return {ux[y * width + x], uy[y * width + x]}; }
};

struct Location {
    std::size_t triangle = 0;
    std::array<double, 3> weights{};
};

/// Uniform bin grid over the mesh bounding box for point-in-triangle queries.
class PointLocator {
public:
    explicit PointLocator(const TriMesh& mesh);

    /// Containing triangle with barycentric weights, or nullopt when the point
    /// is in no triangle. A point on a shared edge or vertex resolves to the
    /// lowest-index containing triangle.
    std::optional<Location> find(const Point2& p) const;

    /// find(), but throws GeometryError when nothing contains p.
    Location locate(const Point2& p) const;

    const TriMesh& mesh() const { return *mesh_; }

private:
    const TriMesh* mesh_;
    double minx_ = 0, miny_ = 0, cell_w_ = 1, cell_h_ = 1;
    long nx_ = 1, ny_ = 1;
    std::vector<std::vector<Index>> bins_;
};

/// Barycentric weights of p with respect to triangle (a, b, c).
std::array<double, 3> barycentric(const Point2& a, const Point2& b, const Point2& c,
                                  const Point2& p);

/// Piecewise-linear interpolation of node displacements at every pixel
/// center of a width x height grid.
DenseField densify(const TriMesh& mesh, std::span<const Vec2> u, std::size_t width,
                   std::size_t height);

/// Backward warp: out(p) = Te(p + u(p)), bicubic, clamped at the border.
ImageGrid warp_image(const ImageGrid& te, const DenseField& field);

/// Per-pixel |a - b|.
ImageGrid difference_image(const ImageGrid& a, const ImageGrid& b);

// Dense field file: "MRDF", u32 width, u32 height, u32 reserved (0), then the
// ux plane and the uy plane as little-endian float32, row-major.
void write_dense_field(const DenseField& field, const std::filesystem::path& path);
DenseField read_dense_field(const std::filesystem::path& path);
std::vector<unsigned char> encode_dense_field(const DenseField& field);
DenseField decode_dense_field(std::span<const unsigned char> bytes);

/// CSV with header "x,y,ux,uy", one line per mesh node.
void write_node_csv(const TriMesh& mesh, std::span<const Vec2> u,
                    const std::filesystem::path& path);

}  // namespace meshreg
