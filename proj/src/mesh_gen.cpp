#include "meshreg/mesh_gen.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <random>
#include <string>
#include <unordered_map>

#include "meshreg/delaunay.hpp"
#include "meshreg/errors.hpp"

namespace meshreg {

void NodeBudget::validate() const {
    for (double f : {canny_fraction, halftone_fraction, uniform_fraction})
        if (!(f >= 0.0 && f <= 1.0)) throw ConfigError("node budget fractions must lie in [0, 1]");
    if (std::abs(canny_fraction + halftone_fraction + uniform_fraction - 1.0) > 1e-9)
        throw ConfigError("node budget fractions must sum to 1");
    if (target_nodes < 4) throw ConfigError("node budget target must be at least 4");
}

void MeshGenConfig::validate() const {
    if (!(canny_low < canny_high)) throw ConfigError("canny_low must be below canny_high");
    if (!(min_node_spacing >= 1.0)) throw ConfigError("min_node_spacing must be at least 1");
    if (!(canny_sigma >= 0.0)) throw ConfigError("canny_sigma must be non-negative");
}

namespace {

// Hash grid answering "is any accepted point within `spacing` of p?".
class SpacingGrid {
public:
    explicit SpacingGrid(double spacing) : spacing_(spacing), cell_(std::max(spacing, 1e-6)) {}

    bool has_neighbor(const Point2& p) const {
        const long cx = cell_of(p.x), cy = cell_of(p.y);
        for (long y = cy - 1; y <= cy + 1; ++y)
            for (long x = cx - 1; x <= cx + 1; ++x) {
                const auto it = cells_.find(key(x, y));
                if (it == cells_.end()) continue;
                for (const Point2& q : it->second)
                    if (norm(p - q) < spacing_) return true;
            }
        return false;
    }

    void insert(const Point2& p) { cells_[key(cell_of(p.x), cell_of(p.y))].push_back(p); }

    bool try_insert(const Point2& p) {
        if (has_neighbor(p)) return false;
        insert(p);
        return true;
    }

private:
    long cell_of(double v) const { return static_cast<long>(std::floor(v / cell_)); }
    static std::uint64_t key(long x, long y) {
        return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(x)) << 32) |
               static_cast<std::uint32_t>(y);
    }

    double spacing_;
    double cell_;
    std::unordered_map<std::uint64_t, std::vector<Point2>> cells_;
};

std::vector<Point2> thin(std::span<const Point2> candidates, double spacing) {
    SpacingGrid grid(spacing);
    std::vector<Point2> out;
    for (const Point2& p : candidates)
        if (grid.try_insert(p)) out.push_back(p);
    return out;
}

// Portable Fisher-Yates (std::shuffle's draw sequence is implementation-defined).
template <typename T>
void seeded_shuffle(std::vector<T>& v, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng() % i]);
}

}  // namespace

std::vector<std::uint8_t> canny_edges(const ImageGrid& img, const MeshGenConfig& cfg) {
    const ImageGrid blurred = gaussian_blur(img, cfg.canny_sigma);
    const long w = static_cast<long>(img.width()), h = static_cast<long>(img.height());
    std::vector<double> gx(w * h), gy(w * h), mag(w * h);
    for (long y = 0; y < h; ++y)
        for (long x = 0; x < w; ++x) {
            const double dx =
                0.5 * (blurred(std::min(x + 1, w - 1), y) - blurred(std::max(x - 1, 0L), y));
            const double dy =
                0.5 * (blurred(x, std::min(y + 1, h - 1)) - blurred(x, std::max(y - 1, 0L)));
            gx[y * w + x] = dx;
            gy[y * w + x] = dy;
            mag[y * w + x] = std::hypot(dx, dy);
        }

    auto m = [&](long x, long y) {
        if (x < 0 || y < 0 || x >= w || y >= h) return 0.0;
        return mag[y * w + x];
    };
    std::vector<double> thinned(w * h, 0.0);
    for (long y = 0; y < h; ++y)
        for (long x = 0; x < w; ++x) {
            const double v = mag[y * w + x];
            if (v < cfg.canny_low) continue;
            double angle = std::atan2(gy[y * w + x], gx[y * w + x]) * 180.0 / M_PI;
            if (angle < 0) angle += 180.0;
            long ox = 1, oy = 0;
            if (angle >= 22.5 && angle < 67.5) {
                ox = 1; oy = 1;
            } else if (angle >= 67.5 && angle < 112.5) {
                ox = 0; oy = 1;
            } else if (angle >= 112.5 && angle < 157.5) {
                ox = -1; oy = 1;
            }
            // Asymmetric comparison keeps exactly one pixel on a plateau.
            if (v >= m(x - ox, y - oy) && v > m(x + ox, y + oy)) thinned[y * w + x] = v;
        }

    std::vector<std::uint8_t> edges(w * h, 0);
    std::deque<long> queue;
    for (long i = 0; i < w * h; ++i)
        if (thinned[i] >= cfg.canny_high) {
            edges[i] = 1;
            queue.push_back(i);
        }
    while (!queue.empty()) {
        const long i = queue.front();
        queue.pop_front();
        const long x = i % w, y = i / w;
        for (long dy = -1; dy <= 1; ++dy)
            for (long dx = -1; dx <= 1; ++dx) {
                const long nx = x + dx, ny = y + dy;
                if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
                const long j = ny * w + nx;
                if (!edges[j] && thinned[j] >= cfg.canny_low) {
                    edges[j] = 1;
                    queue.push_back(j);
                }
            }
    }
    return edges;
}

std::vector<Point2> canny_sample(const ImageGrid& img, const MeshGenConfig& cfg,
                                 std::size_t budget) {
    if (budget == 0) return {};
    const auto edges = canny_edges(img, cfg);
    std::vector<Point2> candidates;
    for (std::size_t y = 0; y < img.height(); ++y)
        for (std::size_t x = 0; x < img.width(); ++x)
            if (edges[y * img.width() + x])
                candidates.push_back({static_cast<double>(x), static_cast<double>(y)});
    if (candidates.empty()) return {};

    double spacing = cfg.min_node_spacing;
    std::vector<Point2> picked = thin(candidates, spacing);
    while (picked.size() > budget) {
        spacing *= 1.1;
        picked = thin(candidates, spacing);
    }
    return picked;
}

std::vector<std::size_t> floyd_steinberg(std::span<const double> density, std::size_t width,
                                         std::size_t height) {
    if (density.size() != width * height) throw ConfigError("density map size mismatch");
    std::vector<double> cur(width + 2, 0.0), next(width + 2, 0.0);
    std::vector<std::size_t> dots;
    for (std::size_t y = 0; y < height; ++y) {
        std::fill(next.begin(), next.end(), 0.0);
        const bool forward = (y % 2) == 0;
        for (std::size_t s = 0; s < width; ++s) {
            const std::size_t x = forward ? s : width - 1 - s;
            const std::size_t c = x + 1;  // padded column
            const double v = density[y * width + x] + cur[c];
            const double out = v >= 0.5 ? 1.0 : 0.0;
            if (out > 0.0) dots.push_back(y * width + x);
            const double err = v - out;
            const std::size_t ahead = forward ? c + 1 : c - 1;
            const std::size_t behind = forward ? c - 1 : c + 1;
            cur[ahead] += err * 7.0 / 16.0;
            next[behind] += err * 3.0 / 16.0;
            next[c] += err * 5.0 / 16.0;
            next[ahead] += err * 1.0 / 16.0;
        }
        std::swap(cur, next);
    }
    std::sort(dots.begin(), dots.end());
    return dots;
}

std::vector<double> halftone_density(const ImageGrid& img, std::size_t budget) {
    const ImageGrid grad = gradient_magnitude(gaussian_blur(img, 1.0));
    const auto g = grad.data();
    std::vector<double> density(g.size(), 0.0);
    const double gmax = *std::max_element(g.begin(), g.end());
    if (budget == 0 || gmax < 1e-6) return density;
    if (budget >= g.size()) {
        std::fill(density.begin(), density.end(), 1.0);
        return density;
    }
    // Find the scale s with sum(min(1, s * g)) == budget.
    auto mass = [&](double s) {
        double acc = 0.0;
        for (double v : g) acc += std::min(1.0, s * v);
        return acc;
    };
    double lo = 0.0, hi = 1.0 / gmax;
    while (mass(hi) < static_cast<double>(budget) && hi < 1e300) hi *= 2.0;
    for (int it = 0; it < 100; ++it) {
        const double mid = 0.5 * (lo + hi);
        (mass(mid) < static_cast<double>(budget) ? lo : hi) = mid;
    }
    for (std::size_t i = 0; i < g.size(); ++i) density[i] = std::min(1.0, hi * g[i]);
    return density;
}

std::vector<Point2> halftone_sample(const ImageGrid& img, std::size_t budget, double spacing,
                                    std::uint64_t seed) {
    if (budget == 0) return {};
    const auto density = halftone_density(img, budget);
    const auto dots = floyd_steinberg(density, img.width(), img.height());
    std::vector<Point2> candidates;
    candidates.reserve(dots.size());
    for (std::size_t idx : dots)
        candidates.push_back({static_cast<double>(idx % img.width()),
                              static_cast<double>(idx / img.width())});
    seeded_shuffle(candidates, seed);
    auto picked = thin(candidates, spacing);
    if (picked.size() > budget) picked.resize(budget);
    std::sort(picked.begin(), picked.end(), [](const Point2& a, const Point2& b) {
        return a.y < b.y || (a.y == b.y && a.x < b.x);
    });
    return picked;
}

std::vector<Point2> uniform_sample(std::size_t width, std::size_t height, std::size_t budget) {
    if (budget < 4) throw ConfigError("uniform_sample needs a budget of at least 4");
    const double maxx = static_cast<double>(width - 1);
    const double maxy = static_cast<double>(height - 1);
    std::vector<Point2> pts{{0.0, 0.0}, {maxx, 0.0}, {0.0, maxy}, {maxx, maxy}};
    if (budget < 9) {
        if (budget >= 5) pts.push_back({0.5 * maxx, 0.5 * maxy});
        return pts;
    }
    const double aspect = maxy > 0.0 ? maxx / maxy : 1.0;
    const auto nx = std::max<long>(2, std::lround(std::sqrt(budget * aspect)));
    const auto ny = std::max<long>(2, std::lround(static_cast<double>(budget) / nx));
    pts.clear();
    for (long j = 0; j < ny; ++j)
        for (long i = 0; i < nx; ++i)
            pts.push_back({maxx * i / (nx - 1), maxy * j / (ny - 1)});
    return pts;
}

namespace {

enum class Relaxation { kCentroid, kCircumcenter };

void relax(std::vector<Point2>& pos, const TriMesh& mesh, const ImageGrid& density,
           double maxx, double maxy, Relaxation kind) {
    const auto& tris = mesh.triangles();
    auto area_of = [&](const Triangle& t) { return signed_area(pos[t[0]], pos[t[1]], pos[t[2]]); };
    for (std::size_t i = 0; i < pos.size(); ++i) {
        const Point2 old = pos[i];
        const bool on_vertical = old.x == 0.0 || old.x == maxx;
        const bool on_horizontal = old.y == 0.0 || old.y == maxy;
        if (on_vertical && on_horizontal) continue;  // corner
        if (mesh.is_boundary(i) && !on_vertical && !on_horizontal) continue;

        Vec2 acc;
        double wsum = 0.0;
        for (Index t : mesh.incident(i)) {
            const Triangle& tri = tris[t];
            const Point2 c = centroid(pos[tri[0]], pos[tri[1]], pos[tri[2]]);
            const Point2 target = kind == Relaxation::kCentroid
                                      ? c
                                      : circumcenter(pos[tri[0]], pos[tri[1]], pos[tri[2]]);
            const double w = std::abs(area_of(tri)) * sample(density, c);
            acc += w * target;
            wsum += w;
        }
        if (!(wsum > 0.0)) continue;
        Point2 cand = acc * (1.0 / wsum);
        if (mesh.is_boundary(i)) {
            if (on_vertical) cand.x = old.x;
            if (on_horizontal) cand.y = old.y;
        }
        cand.x = std::clamp(cand.x, 0.0, maxx);
        cand.y = std::clamp(cand.y, 0.0, maxy);
        if (!std::isfinite(cand.x) || !std::isfinite(cand.y)) continue;

        pos[i] = cand;
        bool ok = true;
        for (Index t : mesh.incident(i))
            if (!(area_of(tris[t]) > 1e-9)) {
                ok = false;
                break;
            }
        if (!ok) pos[i] = old;
    }
}

}  // namespace

TriMesh smooth_mesh(const TriMesh& mesh, const ImageGrid& img, const MeshGenConfig& cfg) {
    if (cfg.cvt_iterations == 0 && cfg.odt_iterations == 0) return mesh;
    // Node density grows with local edge strength; 1 on flat regions.
    const ImageGrid grad = gradient_magnitude(gaussian_blur(img, 1.5));
    const auto g = grad.data();
    const double gmax = *std::max_element(g.begin(), g.end());
    std::vector<double> rho(g.size(), 1.0);
    if (gmax > 1e-6)
        for (std::size_t i = 0; i < g.size(); ++i) rho[i] = 1.0 + 4.0 * g[i] / gmax;
    const ImageGrid density(img.width(), img.height(), std::move(rho));

    std::vector<Point2> pos = mesh.vertices();
    const double maxx = static_cast<double>(img.width() - 1);
    const double maxy = static_cast<double>(img.height() - 1);
    for (std::size_t it = 0; it < cfg.cvt_iterations; ++it)
        relax(pos, mesh, density, maxx, maxy, Relaxation::kCentroid);
    for (std::size_t it = 0; it < cfg.odt_iterations; ++it)
        relax(pos, mesh, density, maxx, maxy, Relaxation::kCircumcenter);
    return TriMesh::build(std::move(pos), mesh.triangles());
}

TriMesh generate_mesh(const ImageGrid& img, const NodeBudget& budget, const MeshGenConfig& cfg,
                      MeshGenStats* stats) {
    budget.validate();
    cfg.validate();
    const std::size_t target = budget.target_nodes;
    const auto n_canny = static_cast<std::size_t>(std::llround(target * budget.canny_fraction));
    const auto n_half = static_cast<std::size_t>(std::llround(target * budget.halftone_fraction));

    const double spacing = cfg.min_node_spacing;
    SpacingGrid features(spacing);
    std::vector<Point2> feature_pts;
    // Corners first: they are mandatory and must never be thinned away.
    for (const Point2& c : uniform_sample(img.width(), img.height(), 4)) {
        features.insert(c);
        feature_pts.push_back(c);
    }
    MeshGenStats st;
    for (const Point2& p : canny_sample(img, cfg, n_canny))
        if (features.try_insert(p)) {
            feature_pts.push_back(p);
            ++st.canny;
        }
    for (const Point2& p : halftone_sample(img, n_half, spacing, cfg.seed))
        if (features.try_insert(p)) {
            feature_pts.push_back(p);
            ++st.halftone;
        }

    // The uniform sampler absorbs whatever the feature samplers did not use.
    std::size_t uniform_budget = std::max<std::size_t>(4, target - std::min(target, st.canny + st.halftone));
    std::vector<Point2> pts;
    for (int attempt = 0; attempt < 12; ++attempt) {
        SpacingGrid grid = features;
        pts = feature_pts;
        for (const Point2& p : uniform_sample(img.width(), img.height(), uniform_budget))
            if (grid.try_insert(p)) pts.push_back(p);
        if (pts.size() >= target || uniform_budget > 4 * target) break;
        uniform_budget += target - pts.size();
    }
    st.uniform = pts.size() - st.canny - st.halftone;
    if (stats) *stats = st;

    TriMesh mesh = delaunay(pts);
    mesh = smooth_mesh(mesh, img, cfg);
    return flip_edges(mesh, cfg.flip_passes);
}

}  // namespace meshreg
