#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

#include "meshreg/geometry.hpp"
#include "meshreg/image.hpp"
#include "meshreg/trimesh.hpp"

namespace testutil {

using meshreg::ImageGrid;
using meshreg::Index;
using meshreg::Triangle;
using meshreg::TriMesh;
using meshreg::Vec2;

inline std::vector<Vec2> random_points(std::size_t n, std::mt19937_64& rng, double w, double h) {
    std::uniform_real_distribution<double> ux(0.0, w), uy(0.0, h);
    std::vector<Vec2> pts(n);
    for (auto& p : pts) p = {ux(rng), uy(rng)};
    return pts;
}

/// Solves the 3x3 system A x = b by Gaussian elimination with partial pivoting.
inline std::array<double, 3> solve3(std::array<std::array<double, 3>, 3> A, std::array<double, 3> b) {
    for (int c = 0; c < 3; ++c) {
        int piv = c;
        for (int r = c + 1; r < 3; ++r)
            if (std::abs(A[r][c]) > std::abs(A[piv][c])) piv = r;
        std::swap(A[c], A[piv]);
        std::swap(b[c], b[piv]);
        for (int r = c + 1; r < 3; ++r) {
            const double f = A[r][c] / A[c][c];
            for (int k = c; k < 3; ++k) A[r][k] -= f * A[c][k];
            b[r] -= f * b[c];
        }
    }
    std::array<double, 3> x{};
    for (int r = 2; r >= 0; --r) {
        double s = b[r];
        for (int k = r + 1; k < 3; ++k) s -= A[r][k] * x[k];
        x[r] = s / A[r][r];
    }
    return x;
}

/// Gradient (a, b) of the plane a x + b y + c through three samples.
inline Vec2 plane_fit_gradient(const std::array<Vec2, 3>& v, const std::array<double, 3>& f) {
    const auto x = solve3({{{v[0].x, v[0].y, 1.0}, {v[1].x, v[1].y, 1.0}, {v[2].x, v[2].y, 1.0}}}, f);
    return {x[0], x[1]};
}

/// Circumcircle from the linear system |c - a|^2 = |c - b|^2 = |c - d|^2.
inline std::pair<Vec2, double> circumcircle(const Vec2& a, const Vec2& b, const Vec2& c) {
    const double a11 = 2 * (b.x - a.x), a12 = 2 * (b.y - a.y);
    const double a21 = 2 * (c.x - a.x), a22 = 2 * (c.y - a.y);
    const double r1 = b.x * b.x - a.x * a.x + b.y * b.y - a.y * a.y;
    const double r2 = c.x * c.x - a.x * a.x + c.y * c.y - a.y * a.y;
    const double det = a11 * a22 - a12 * a21;
    const Vec2 center{(r1 * a22 - a12 * r2) / det, (a11 * r2 - r1 * a21) / det};
    return {center, std::hypot(center.x - a.x, center.y - a.y)};
}

/// O(n_T * n_V) empty-circumcircle audit: count of vertices strictly inside a
/// circumcircle by more than `margin` pixels.
inline std::size_t brute_force_violations(const TriMesh& mesh, double margin = 1e-9) {
    std::size_t bad = 0;
    const auto& V = mesh.vertices();
    for (const auto& t : mesh.triangles()) {
        const auto [c, r] = circumcircle(V[t[0]], V[t[1]], V[t[2]]);
        for (std::size_t i = 0; i < V.size(); ++i) {
            if (static_cast<Index>(i) == t[0] || static_cast<Index>(i) == t[1] ||
                static_cast<Index>(i) == t[2])
                continue;
            if (std::hypot(V[i].x - c.x, V[i].y - c.y) < r - margin) ++bad;
        }
    }
    return bad;
}

/// Area of the convex hull (Andrew's monotone chain).
inline double hull_area(std::vector<Vec2> p) {
    std::sort(p.begin(), p.end(), [](const Vec2& a, const Vec2& b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
    auto cr = [](const Vec2& o, const Vec2& a, const Vec2& b) {
        return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
    };
    std::vector<Vec2> h(2 * p.size());
    std::size_t k = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        while (k >= 2 && cr(h[k - 2], h[k - 1], p[i]) <= 0) --k;
        h[k++] = p[i];
    }
    for (std::size_t i = p.size() - 1, t = k + 1; i-- > 0;) {
        while (k >= t && cr(h[k - 2], h[k - 1], p[i]) <= 0) --k;
        h[k++] = p[i];
    }
    h.resize(k - 1);
    double a = 0;
    for (std::size_t i = 0; i < h.size(); ++i) {
        const auto& u = h[i];
        const auto& v = h[(i + 1) % h.size()];
        a += u.x * v.y - v.x * u.y;
    }
    return 0.5 * a;
}

inline double total_area(const TriMesh& mesh) {
    double a = 0;
    for (const auto& t : mesh.triangles()) {
        const Vec2 p = mesh.vertex(t[0]), q = mesh.vertex(t[1]), r = mesh.vertex(t[2]);
        a += 0.5 * ((q.x - p.x) * (r.y - p.y) - (q.y - p.y) * (r.x - p.x));
    }
    return a;
}

/// Structured (nx+1) x (ny+1) grid over [0, w] x [0, h], each cell split along
/// alternating diagonals.
inline TriMesh grid_mesh(int nx, int ny, double w, double h) {
    std::vector<Vec2> V;
    for (int j = 0; j <= ny; ++j)
        for (int i = 0; i <= nx; ++i) V.push_back({w * i / nx, h * j / ny});
    std::vector<Triangle> T;
    auto id = [&](int i, int j) { return static_cast<Index>(j * (nx + 1) + i); };
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            if ((i + j) % 2 == 0) {
                T.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
                T.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
            } else {
                T.push_back({id(i, j), id(i + 1, j), id(i, j + 1)});
                T.push_back({id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)});
            }
        }
    return TriMesh::build(std::move(V), std::move(T));
}

/// Center vertex 0 with a regular hexagon 1..6 of radius r around (cx, cy).
inline TriMesh hexagon_fan(double cx = 0, double cy = 0, double r = 1.0) {
    std::vector<Vec2> V{{cx, cy}};
    for (int k = 0; k < 6; ++k) {
        const double a = k * M_PI / 3.0;
        V.push_back({cx + r * std::cos(a), cy + r * std::sin(a)});
    }
    std::vector<Triangle> T;
    for (Index k = 0; k < 6; ++k) T.push_back({0, 1 + k, 1 + (k + 1) % 6});
    return TriMesh::build(std::move(V), std::move(T));
}

/// Random image with values in [0, 255].
inline ImageGrid random_image(std::size_t w, std::size_t h, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 255.0);
    std::vector<double> d(w * h);
    for (auto& v : d) v = u(rng);
    return ImageGrid(w, h, std::move(d));
}

template <class F>
ImageGrid image_from(std::size_t w, std::size_t h, F f) {
    ImageGrid img(w, h);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) img.at(x, y) = f(static_cast<double>(x), static_cast<double>(y));
    return img;
}

}  // namespace testutil
