#include "meshreg/delaunay.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "meshreg/errors.hpp"

namespace meshreg {

std::vector<Point2> dedupe_points(std::span<const Point2> points, double tol) {
    std::vector<std::size_t> order(points.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return points[a].x < points[b].x;
    });
    std::vector<char> keep(points.size(), 1);
    for (std::size_t s = 0; s < order.size(); ++s) {
        const Point2& p = points[order[s]];
        for (std::size_t r = s; r-- > 0;) {
            const Point2& q = points[order[r]];
            if (p.x - q.x > tol) break;
            if (keep[order[r]] && norm(p - q) <= tol) {
                // Keep whichever came first in the input.
                if (order[r] < order[s]) {
                    keep[order[s]] = 0;
                } else {
                    keep[order[r]] = 0;
                }
                break;
            }
        }
    }
    std::vector<Point2> out;
    out.reserve(points.size());
    for (std::size_t i = 0; i < points.size(); ++i)
        if (keep[i]) out.push_back(points[i]);
    return out;
}

namespace {

constexpr Index kNone = -1;

struct BwTriangle {
    std::array<Index, 3> v;
    std::array<Index, 3> nb;  // neighbour across the edge opposite v[k]
    bool alive = true;
};

// Bowyer-Watson state. The three super-triangle vertices carry finite
// coordinates for point location, but their circumcircle tests are evaluated
// in the limit of an infinitely large super-triangle, so hull edges come out
// exactly convex even with long collinear boundary chains.
class BowyerWatson {
public:
    explicit BowyerWatson(std::span<const Point2> pts) : n_(static_cast<Index>(pts.size())) {
        pos_.assign(pts.begin(), pts.end());
        double minx = pts[0].x, maxx = minx, miny = pts[0].y, maxy = miny;
        for (const Point2& p : pts) {
            minx = std::min(minx, p.x); maxx = std::max(maxx, p.x);
            miny = std::min(miny, p.y); maxy = std::max(maxy, p.y);
        }
        const Vec2 c{0.5 * (minx + maxx), 0.5 * (miny + maxy)};
        const double extent = std::max({maxx - minx, maxy - miny, 1.0});
        const double radius = 1e4 * extent;
        for (int k = 0; k < 3; ++k) {
            const double theta = 0.3 + 2.0 * M_PI * k / 3.0;
            dir_[k] = {std::cos(theta), std::sin(theta)};
            pos_.push_back(c + radius * dir_[k]);
        }
        tris_.push_back({{n_, n_ + 1, n_ + 2}, {kNone, kNone, kNone}, true});
    }

    void insert(Index p) {
        const Index seed = locate(pos_[p]);
        carve(p, seed);
    }

    std::vector<Triangle> finite_triangles() const {
        std::vector<Triangle> out;
        for (const BwTriangle& t : tris_)
            if (t.alive && t.v[0] < n_ && t.v[1] < n_ && t.v[2] < n_) out.push_back(t.v);
        return out;
    }

private:
    bool is_super(Index v) const { return v >= n_; }

    // orient2d with super vertices taken in the same infinite limit as the
    // circumcircle test; only the sign is meaningful when one is involved.
    double orient(Index a, Index b, const Point2& p) const {
        double o = 0.0;
        if (is_super(a) && is_super(b))
            o = cross(dir_[a - n_], dir_[b - n_]);
        else if (is_super(a))
            o = -cross(dir_[a - n_], p - pos_[b]);
        else if (is_super(b))
            o = cross(dir_[b - n_], p - pos_[a]);
        if (o != 0.0) return o;
        // Same rounding from both sides of an edge, so a point on it is never
        // rejected by both triangles.
        return a < b ? orient2d(pos_[a], pos_[b], p) : -orient2d(pos_[b], pos_[a], p);
    }

    Index locate(const Point2& p) {
        Index t = last_;
        if (t < 0 || !tris_[t].alive) t = static_cast<Index>(tris_.size()) - 1;
        while (!tris_[t].alive) --t;
        const std::size_t max_steps = 4 * tris_.size() + 16;
        for (std::size_t step = 0; step < max_steps; ++step) {
            const BwTriangle& tri = tris_[t];
            bool moved = false;
            for (int r = 0; r < 3; ++r) {
                const int k = (r + static_cast<int>(step)) % 3;
                if (orient(tri.v[(k + 1) % 3], tri.v[(k + 2) % 3], p) < 0.0 && tri.nb[k] != kNone) {
                    t = tri.nb[k];
                    moved = true;
                    break;
                }
            }
            if (!moved) return t;
        }
        // Walk failed to settle (numerical cycling); fall back to a scan.
        for (std::size_t i = 0; i < tris_.size(); ++i) {
            const BwTriangle& tri = tris_[i];
            if (!tri.alive) continue;
            if (orient(tri.v[0], tri.v[1], p) >= 0.0 && orient(tri.v[1], tri.v[2], p) >= 0.0 &&
                orient(tri.v[2], tri.v[0], p) >= 0.0)
                return static_cast<Index>(i);
        }
        throw GeometryError("delaunay: point location failed");
    }

    bool in_conflict(const BwTriangle& t, const Point2& p) const {
        int supers = 0;
        for (Index v : t.v) supers += is_super(v);
        if (supers == 0)
            return incircle(pos_[t.v[0]], pos_[t.v[1]], pos_[t.v[2]], p) > 0.0;
        if (supers == 3) return true;
        if (supers == 1) {
            int k = 0;
            while (!is_super(t.v[k])) ++k;
            const Point2& a = pos_[t.v[(k + 1) % 3]];
            const Point2& b = pos_[t.v[(k + 2) % 3]];
            const double o = orient2d(a, b, p);
            if (o != 0.0) return o > 0.0;
            return dot(p - a, b - a) > 0.0 && dot(p - b, a - b) > 0.0;
        }
        int k = 0;
        while (is_super(t.v[k])) ++k;
        const Vec2 d1 = dir_[t.v[(k + 1) % 3] - n_];
        const Vec2 d2 = dir_[t.v[(k + 2) % 3] - n_];
        const Vec2 c = circumcenter(Vec2{0.0, 0.0}, d1, d2);
        return dot(p - pos_[t.v[k]], c) > 0.0;
    }

    void carve(Index p, Index seed) {
        const Point2& pp = pos_[p];
        ++stamp_;
        if (mark_.size() < tris_.size()) mark_.resize(tris_.size(), 0);
        std::vector<Index> cavity{seed};
        mark_[seed] = stamp_;
        for (std::size_t q = 0; q < cavity.size(); ++q) {
            for (Index nb : tris_[cavity[q]].nb) {
                if (nb == kNone || mark_[nb] == stamp_) continue;
                if (in_conflict(tris_[nb], pp)) {
                    mark_[nb] = stamp_;
                    cavity.push_back(nb);
                }
            }
        }

        // Grow until every boundary edge is strictly visible from p.
        struct Edge {
            Index a, b, outer;
        };
        std::vector<Edge> boundary;
        for (bool grown = true; grown;) {
            grown = false;
            boundary.clear();
            for (std::size_t q = 0; q < cavity.size(); ++q) {
                const BwTriangle& t = tris_[cavity[q]];
                for (int k = 0; k < 3; ++k) {
                    const Index nb = t.nb[k];
                    if (nb != kNone && mark_[nb] == stamp_) continue;
                    const Index a = t.v[(k + 1) % 3], b = t.v[(k + 2) % 3];
                    if (orient(a, b, pp) <= 0.0 && nb != kNone) {
                        mark_[nb] = stamp_;
                        cavity.push_back(nb);
                        grown = true;
                    } else {
                        boundary.push_back({a, b, nb});
                    }
                }
            }
        }

        for (Index t : cavity) tris_[t].alive = false;

        const auto first = static_cast<Index>(tris_.size());
        std::unordered_map<Index, Index> by_start, by_end;
        by_start.reserve(boundary.size() * 2);
        by_end.reserve(boundary.size() * 2);
        for (const Edge& e : boundary) {
            const auto id = static_cast<Index>(tris_.size());
            tris_.push_back({{e.a, e.b, p}, {kNone, kNone, e.outer}, true});
            by_start[e.a] = id;
            by_end[e.b] = id;
            if (e.outer != kNone) {
                BwTriangle& o = tris_[e.outer];
                for (int k = 0; k < 3; ++k) {
                    const Index oa = o.v[(k + 1) % 3], ob = o.v[(k + 2) % 3];
                    if (oa == e.b && ob == e.a) o.nb[k] = id;
                }
            }
        }
        for (auto id = first; id < static_cast<Index>(tris_.size()); ++id) {
            BwTriangle& t = tris_[id];
            t.nb[0] = by_start.at(t.v[1]);  // edge (b, p)
            t.nb[1] = by_end.at(t.v[0]);    // edge (p, a)
        }
        mark_.resize(tris_.size(), 0);
        last_ = static_cast<Index>(tris_.size()) - 1;
    }

    Index n_;
    std::vector<Point2> pos_;
    std::array<Vec2, 3> dir_{};
    std::vector<BwTriangle> tris_;
    std::vector<std::uint32_t> mark_;
    std::uint32_t stamp_ = 0;
    Index last_ = 0;
};

// Insertion order along a serpentine sweep of a coarse grid keeps successive
// points close, so the walk in locate() stays short.
std::vector<Index> insertion_order(std::span<const Point2> pts) {
    double minx = pts[0].x, maxx = minx, miny = pts[0].y, maxy = miny;
    for (const Point2& p : pts) {
        minx = std::min(minx, p.x); maxx = std::max(maxx, p.x);
        miny = std::min(miny, p.y); maxy = std::max(maxy, p.y);
    }
    const auto cells = std::max<long>(1, std::lround(std::sqrt(pts.size() / 4.0)));
    const double cw = std::max(maxx - minx, 1e-12) / cells;
    const double ch = std::max(maxy - miny, 1e-12) / cells;
    auto key = [&](const Point2& p) {
        const long row = std::min(cells - 1, static_cast<long>((p.y - miny) / ch));
        long col = std::min(cells - 1, static_cast<long>((p.x - minx) / cw));
        if (row % 2) col = cells - 1 - col;
        return std::pair{row, col};
    };
    std::vector<Index> order(pts.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](Index a, Index b) { return key(pts[a]) < key(pts[b]); });
    return order;
}

bool lex_less(const Point2& a, const Point2& b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
}

std::uint64_t edge_key(Index a, Index b) {
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}

}  // namespace

TriMesh delaunay(std::span<const Point2> points) {
    for (const Point2& p : points)
        if (!std::isfinite(p.x) || !std::isfinite(p.y))
            throw GeometryError("delaunay: non-finite input point");
    std::vector<Point2> pts = dedupe_points(points);
    if (pts.size() < 3) throw GeometryError("delaunay: fewer than 3 distinct points");

    std::size_t far = 1;
    for (std::size_t i = 1; i < pts.size(); ++i)
        if (norm2(pts[i] - pts[0]) > norm2(pts[far] - pts[0])) far = i;
    const double len = norm(pts[far] - pts[0]);
    bool collinear = true;
    for (const Point2& p : pts)
        if (std::abs(orient2d(pts[0], pts[far], p)) > 1e-12 * len * len) {
            collinear = false;
            break;
        }
    if (collinear) throw GeometryError("delaunay: all points are collinear");

    BowyerWatson bw(pts);
    for (Index i : insertion_order(pts)) bw.insert(i);

    TriMesh mesh = TriMesh::build(std::move(pts), bw.finite_triangles());
    // Canonicalise cocircular ties and clean up rounding-level violations.
    return flip_edges(mesh, 10'000);
}

TriMesh flip_edges(const TriMesh& mesh, std::size_t passes) {
    std::vector<Triangle> tris = mesh.triangles();
    const auto& V = mesh.vertices();
    constexpr double kTieTol = 1e-12;
    constexpr double kMinOrient = 2e-9;

    for (std::size_t pass = 0; pass < passes; ++pass) {
        std::unordered_map<std::uint64_t, std::array<Index, 2>> edge_tris;
        edge_tris.reserve(tris.size() * 2);
        for (std::size_t t = 0; t < tris.size(); ++t)
            for (int k = 0; k < 3; ++k) {
                auto [it, fresh] = edge_tris.try_emplace(
                    edge_key(tris[t][k], tris[t][(k + 1) % 3]), std::array<Index, 2>{kNone, kNone});
                it->second[fresh ? 0 : 1] = static_cast<Index>(t);
            }

        std::vector<char> dirty(tris.size(), 0);
        std::size_t flips = 0;
        // Deterministic edge order.
        std::vector<std::pair<std::uint64_t, std::array<Index, 2>>> edges(edge_tris.begin(),
                                                                          edge_tris.end());
        std::sort(edges.begin(), edges.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        for (const auto& [key, pair] : edges) {
            const Index t1 = pair[0], t2 = pair[1];
            if (t2 == kNone || dirty[t1] || dirty[t2]) continue;
            const auto ea = static_cast<Index>(key >> 32);
            const auto eb = static_cast<Index>(key & 0xffffffffu);
            // Orient so that t1 = (a, b, c) is CCW with edge a->b.
            Index a = ea, b = eb, c = kNone, d = kNone;
            for (int k = 0; k < 3; ++k) {
                if (tris[t1][k] == ea && tris[t1][(k + 1) % 3] == eb) c = tris[t1][(k + 2) % 3];
                if (tris[t1][k] == eb && tris[t1][(k + 1) % 3] == ea) {
                    a = eb;
                    b = ea;
                    c = tris[t1][(k + 2) % 3];
                }
            }
            for (Index v : tris[t2])
                if (v != a && v != b) d = v;
            if (c == kNone || d == kNone) continue;

            const Point2 &pa = V[a], &pb = V[b], &pc = V[c], &pd = V[d];
            double scale = 0.0;
            for (const Point2* q : {&pb, &pc, &pd}) scale = std::max(scale, norm2(*q - pa));
            const double rel = incircle(pa, pb, pc, pd) / (scale * scale);
            bool flip = rel > kTieTol;
            if (!flip && rel >= -kTieTol) {
                const Point2* lo = &pa;
                for (const Point2* q : {&pb, &pc, &pd})
                    if (lex_less(*q, *lo)) lo = q;
                flip = (lo == &pc || lo == &pd);
            }
            if (!flip) continue;
            if (orient2d(pc, pa, pd) <= kMinOrient || orient2d(pd, pb, pc) <= kMinOrient) continue;
            tris[t1] = {c, a, d};
            tris[t2] = {d, b, c};
            dirty[t1] = dirty[t2] = 1;
            ++flips;
        }
        if (flips == 0) break;
    }
    return TriMesh::build(mesh.vertices(), std::move(tris));
}

std::size_t count_delaunay_violations(const TriMesh& mesh, double margin) {
    const auto& V = mesh.vertices();
    if (V.empty()) return 0;
    double minx = V[0].x, maxx = minx, miny = V[0].y, maxy = miny;
    for (const Point2& p : V) {
        minx = std::min(minx, p.x); maxx = std::max(maxx, p.x);
        miny = std::min(miny, p.y); maxy = std::max(maxy, p.y);
    }
    const auto cells = std::max<long>(1, std::lround(std::sqrt(V.size() / 2.0)));
    const double cw = std::max(maxx - minx, 1e-12) / cells;
    const double ch = std::max(maxy - miny, 1e-12) / cells;
    auto cx = [&](double x) { return std::clamp(static_cast<long>((x - minx) / cw), 0L, cells - 1); };
    auto cy = [&](double y) { return std::clamp(static_cast<long>((y - miny) / ch), 0L, cells - 1); };
    std::vector<std::vector<Index>> grid(cells * cells);
    for (std::size_t i = 0; i < V.size(); ++i)
        grid[cy(V[i].y) * cells + cx(V[i].x)].push_back(static_cast<Index>(i));

    std::size_t violations = 0;
    for (const Triangle& t : mesh.triangles()) {
        const Point2 cc = circumcenter(V[t[0]], V[t[1]], V[t[2]]);
        const double r = norm(V[t[0]] - cc);
        for (long gy = cy(cc.y - r); gy <= cy(cc.y + r); ++gy)
            for (long gx = cx(cc.x - r); gx <= cx(cc.x + r); ++gx)
                for (Index i : grid[gy * cells + gx]) {
                    if (i == t[0] || i == t[1] || i == t[2]) continue;
                    if (norm(V[i] - cc) < r - margin) ++violations;
                }
    }
    return violations;
}

double min_angle_degrees(const TriMesh& mesh) {
    double lo = 180.0;
    for (const Triangle& t : mesh.triangles())
        for (int k = 0; k < 3; ++k) {
            const Vec2 a = mesh.vertex(t[(k + 1) % 3]) - mesh.vertex(t[k]);
            const Vec2 b = mesh.vertex(t[(k + 2) % 3]) - mesh.vertex(t[k]);
            const double ang = std::atan2(std::abs(cross(a, b)), dot(a, b));
            lo = std::min(lo, ang * 180.0 / M_PI);
        }
    return lo;
}

}  // namespace meshreg
