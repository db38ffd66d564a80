#include "meshreg/registration.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "meshreg/errors.hpp"

namespace meshreg {

const char* to_string(GradientSource s) {
    return s == GradientSource::kMesh ? "mesh" : "analytic";
}

GradientSource gradient_source_from_string(const std::string& s) {
    if (s == "mesh") return GradientSource::kMesh;
    if (s == "analytic") return GradientSource::kAnalytic;
    throw ConfigError("unknown gradient source '" + s + "' (expected mesh or analytic)");
}

void SolverConfig::validate() const {
    if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError("tau must be positive");
    if (!(lambda > 0.0 && lambda < 1.0)) throw ConfigError("lambda must lie in (0, 1)");
    if (max_iterations < 1) throw ConfigError("max_iterations must be at least 1");
    if (!(energy_tolerance >= 0.0)) throw ConfigError("energy_tolerance must be non-negative");
}

std::vector<double> warp_sample(const ImageGrid& te, std::span<const Vec2> vertices,
                                std::span<const Vec2> u) {
    if (vertices.size() != u.size()) throw ConfigError("warp_sample: size mismatch");
    std::vector<double> out(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) out[i] = sample(te, vertices[i] + u[i]);
    return out;
}

std::vector<double> residuals(const ImageGrid& re, const ImageGrid& te, const TriMesh& mesh,
                              std::span<const Vec2> u) {
    std::vector<double> r = warp_sample(te, mesh.vertices(), u);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] -= sample(re, mesh.vertex(i));
    return r;
}

double energy(const ImageGrid& re, const ImageGrid& te, const TriMesh& mesh,
              std::span<const Vec2> u) {
    double e = 0.0;
    for (double r : residuals(re, te, mesh, u)) e += 0.5 * r * r;
    return e;
}

namespace {

DisplacementField gradient_from(const ImageGrid& te, const TriMesh& mesh,
                                const TriangleGeometry& geom, std::span<const Vec2> u,
                                std::span<const double> r, GradientSource source) {
    DisplacementField g(u.size());
    if (source == GradientSource::kMesh) {
        const auto warped = warp_sample(te, mesh.vertices(), u);
        g = vertex_gradients(mesh, geom, warped);
    } else {
        for (std::size_t i = 0; i < u.size(); ++i) g[i] = sample_gradient(te, mesh.vertex(i) + u[i]);
    }
    for (std::size_t i = 0; i < g.size(); ++i) g[i] *= r[i];
    return g;
}

double sum_half_squares(std::span<const double> r) {
    double e = 0.0;
    for (double v : r) e += 0.5 * v * v;
    return e;
}

}  // namespace

DisplacementField energy_gradient(const ImageGrid& re, const ImageGrid& te, const TriMesh& mesh,
                                  std::span<const Vec2> u, GradientSource source) {
    if (u.size() != mesh.n_vertices()) throw ConfigError("energy_gradient: size mismatch");
    const auto r = residuals(re, te, mesh, u);
    return gradient_from(te, mesh, compute_geometry(mesh), u, r, source);
}

DisplacementField step(std::span<const Vec2> u, std::span<const Vec2> grad,
                       const SolverConfig& cfg, const LaplacianMatrix& L,
                       std::span<const Vec2> vertices, double max_x, double max_y) {
    cfg.validate();
    if (grad.size() != u.size() || vertices.size() != u.size())
        throw ConfigError("step: size mismatch");
    DisplacementField u0(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (!std::isfinite(grad[i].x) || !std::isfinite(grad[i].y))
            throw DivergenceError("non-finite energy gradient; reduce tau");
        u0[i] = u[i] - cfg.tau * grad[i];
    }
    DisplacementField u1 = cfg.smoothing_passes > 0
                               ? smooth_displacement(L, u0, cfg.lambda, cfg.smoothing_passes)
                               : std::move(u0);
    for (std::size_t i = 0; i < u1.size(); ++i) {
        const Vec2 p = vertices[i] + u1[i];
        u1[i] = Vec2{std::clamp(p.x, 0.0, max_x), std::clamp(p.y, 0.0, max_y)} - vertices[i];
    }
    return u1;
}

RegistrationResult register_images(const ImageGrid& re, const ImageGrid& te, const TriMesh& mesh,
                                   const SolverConfig& cfg) {
    cfg.validate();
    if (!re.same_shape(te)) throw ConfigError("reference and template sizes differ");
    const auto start = std::chrono::steady_clock::now();

    const TriangleGeometry geom = compute_geometry(mesh);
    const LaplacianMatrix L = build_laplacian(mesh);
    const double max_x = static_cast<double>(te.width() - 1);
    const double max_y = static_cast<double>(te.height() - 1);

    RegistrationResult res;
    RegistrationReport& rep = res.report;
    rep.config = cfg;
    rep.unknowns = mesh.n_vertices();
    res.u.assign(mesh.n_vertices(), Vec2{});

    std::size_t rising = 0;
    for (std::size_t k = 0; k < cfg.max_iterations; ++k) {
        const auto r = residuals(re, te, mesh, res.u);
        const double e = sum_half_squares(r);
        if (!std::isfinite(e)) throw DivergenceError("energy became non-finite");
        rep.energy_trace.push_back(e);
        rep.iterations_run = k + 1;

        if (k > 0 && e > rep.energy_trace[k - 1]) {
            if (++rising >= 10)
                throw DivergenceError("energy increased for 10 consecutive iterations (iteration " +
                                      std::to_string(k) + ", energy " + std::to_string(e) +
                                      "); reduce tau");
        } else {
            rising = 0;
        }
        if (e == 0.0) {
            rep.converged = true;
            break;
        }
        if (k >= 5) {
            const double old = rep.energy_trace[k - 5];
            if (std::abs(old - e) <= cfg.energy_tolerance * old) {
                rep.converged = true;
                break;
            }
        }

        const auto g = gradient_from(te, mesh, geom, res.u, r, cfg.gradient);
        res.u = step(res.u, g, cfg, L, mesh.vertices(), max_x, max_y);
    }

    res.field = densify(mesh, res.u, te.width(), te.height());
    res.warped = warp_image(te, res.field);
    rep.msd_before = msd(te, re);
    rep.msd_after = msd(res.warped, re);
    rep.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return res;
}

}  // namespace meshreg
