#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "meshreg/geometry.hpp"
#include "meshreg/trimesh.hpp"

namespace meshreg {

/// Removes points closer than tol to an earlier kept point, preserving the
/// order of the survivors.
std::vector<Point2> dedupe_points(std::span<const Point2> points, double tol = 1e-9);

/// Incremental Bowyer-Watson triangulation of the convex hull of `points`.
///
/// Duplicates (within 1e-9) are dropped first; the output vertex list is the
/// deduplicated input in its original order. All triangles are CCW. When four
/// points are cocircular, the diagonal touching the lexicographically smallest
/// (x, then y) of the four is kept. Throws GeometryError for fewer than three
/// distinct points or an all-collinear input.
TriMesh delaunay(std::span<const Point2> points);

/// Lawson edge flipping until every interior edge is locally Delaunay or the
/// pass budget runs out. Vertex positions and indices are unchanged.
TriMesh flip_edges(const TriMesh& mesh, std::size_t passes);

/// Number of (triangle, vertex) pairs where the vertex lies strictly inside the
/// triangle's circumcircle by more than `margin`. Uses a bucket grid over
/// circumcircle bounding boxes.
std::size_t count_delaunay_violations(const TriMesh& mesh, double margin = 1e-9);

/// Smallest interior angle over all triangles, in degrees.
double min_angle_degrees(const TriMesh& mesh);

}  // namespace meshreg
