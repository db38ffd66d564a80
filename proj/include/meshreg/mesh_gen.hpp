#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "meshreg/geometry.hpp"
#include "meshreg/image.hpp"
#include "meshreg/trimesh.hpp"

namespace meshreg {

/// How the node target is split among the three samplers.
struct NodeBudget {
    double canny_fraction = 0.4;
    double halftone_fraction = 0.4;
    double uniform_fraction = 0.2;
    std::size_t target_nodes = 1000;

    /// Throws ConfigError unless fractions are in [0,1], sum to 1 (1e-9) and
    /// target_nodes >= 4.
    void validate() const;
};

struct MeshGenConfig {
    double canny_sigma = 1.0;
    double canny_low = 4.0;    // gradient magnitude, intensity units per pixel
    double canny_high = 10.0;
    double min_node_spacing = 2.0;
    std::size_t cvt_iterations = 3;
    std::size_t odt_iterations = 3;
    std::size_t flip_passes = 100;
    std::uint64_t seed = 1;

    void validate() const;
};

/// Binary Canny edge map (1 = edge pixel): Gaussian smoothing, central
/// difference gradients, non-maximum suppression and hysteresis.
std::vector<std::uint8_t> canny_edges(const ImageGrid& img, const MeshGenConfig& cfg);

/// Up to `budget` edge pixels, spread along the edges with at least
/// cfg.min_node_spacing between accepted points. The spacing is widened as
/// needed so the picks cover all edges instead of the first ones in raster order.
std::vector<Point2> canny_sample(const ImageGrid& img, const MeshGenConfig& cfg,
                                 std::size_t budget);

/// Serpentine Floyd-Steinberg error diffusion of a density map with values
/// in [0, 1]; returns the indices of "on" pixels in raster order.
std::vector<std::size_t> floyd_steinberg(std::span<const double> density, std::size_t width,
                                         std::size_t height);

/// Gradient-magnitude density map normalised so that it sums to `budget`
/// (each pixel capped at 1). All zeros when the image has no gradient.
std::vector<double> halftone_density(const ImageGrid& img, std::size_t budget);

/// Error-diffused dots of halftone_density(), thinned to `spacing` in a
/// seeded random order and capped at `budget`.
std::vector<Point2> halftone_sample(const ImageGrid& img, std::size_t budget, double spacing,
                                    std::uint64_t seed = 1);

/// Regular grid including the four corners. Fewer than nine points degrade to
/// the corners, plus the center once budget >= 5. Throws ConfigError when
/// budget < 4.
std::vector<Point2> uniform_sample(std::size_t width, std::size_t height, std::size_t budget);

/// Image-weighted CVT then ODT relaxation. Interior nodes move to the
/// density-weighted centroid (CVT) or circumcenter average (ODT) of their
/// incident triangles. Nodes on a side of the image rectangle slide along it,
/// corners and other boundary nodes stay put. Moves that would drop an incident
/// triangle's signed area to 1e-9 or below are rejected.
TriMesh smooth_mesh(const TriMesh& mesh, const ImageGrid& img, const MeshGenConfig& cfg);

/// Sample counts contributed by each stage of generate_mesh().
struct MeshGenStats {
    std::size_t canny = 0;
    std::size_t halftone = 0;
    std::size_t uniform = 0;
};

/// Full pipeline: canny -> halftone -> uniform (deduplicated, corners forced)
/// -> delaunay -> smooth_mesh -> flip_edges.
TriMesh generate_mesh(const ImageGrid& img, const NodeBudget& budget, const MeshGenConfig& cfg,
                      MeshGenStats* stats = nullptr);

// Mesh files. The .node file holds a count line and then "index x y" lines;
// the .ele file a count line and then "index v1 v2 v3"; indices are 0-based.
void write_triangle_files(const TriMesh& mesh, const std::filesystem::path& node_path,
                          const std::filesystem::path& ele_path);
TriMesh read_triangle_files(const std::filesystem::path& node_path,
                            const std::filesystem::path& ele_path);
/// {"nodes": [[x, y], ...], "triangles": [[i, j, k], ...]}
void write_mesh_json(const TriMesh& mesh, const std::filesystem::path& path);
TriMesh read_mesh_json(const std::filesystem::path& path);
/// Loads either a .json mesh or a .node/.ele pair (given either file or the
/// shared stem).
TriMesh load_mesh(const std::filesystem::path& path);

}  // namespace meshreg
