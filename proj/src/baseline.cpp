#include "meshreg/baseline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

#include "meshreg/errors.hpp"

namespace meshreg {

void smooth_grid(PixelField& field, double lambda) {
    const std::size_t w = field.width, h = field.height;
    for (auto* plane : {&field.ux, &field.uy}) {
        const std::vector<double> src = *plane;
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x) {
                double acc = 0.0;
                int count = 0;
                if (x > 0) acc += src[y * w + x - 1], ++count;
                if (x + 1 < w) acc += src[y * w + x + 1], ++count;
                if (y > 0) acc += src[(y - 1) * w + x], ++count;
                if (y + 1 < h) acc += src[(y + 1) * w + x], ++count;
                const double c = src[y * w + x];
                (*plane)[y * w + x] = count ? (1.0 - lambda) * c + lambda * acc / count : c;
            }
    }
}

std::size_t matched_pixel_passes(const TriMesh& mesh) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < mesh.n_vertices(); ++i)
        for (Index j : mesh.ring(i)) {
            sum += norm2(mesh.vertex(static_cast<std::size_t>(j)) - mesh.vertex(i));
            ++count;
        }
    if (count == 0) return 1;
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(sum / count)));
}

PixelRegistrationResult register_pixelwise(const ImageGrid& re, const ImageGrid& te,
                                           const SolverConfig& cfg) {
    cfg.validate();
    if (!re.same_shape(te)) throw ConfigError("reference and template sizes differ");
    const auto start = std::chrono::steady_clock::now();
    const std::size_t w = te.width(), h = te.height();
    const double max_x = static_cast<double>(w - 1), max_y = static_cast<double>(h - 1);

    PixelRegistrationResult res;
    res.field = PixelField(w, h);
    RegistrationReport& rep = res.report;
    rep.engine = "pixel";
    rep.config = cfg;
    rep.unknowns = w * h;

    std::vector<double> r(w * h);
    std::size_t rising = 0;
    for (std::size_t k = 0; k < cfg.max_iterations; ++k) {
        double e = 0.0;
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x) {
                const std::size_t i = y * w + x;
                const Point2 p{x + res.field.ux[i], y + res.field.uy[i]};
                r[i] = sample(te, p) - re(x, y);
                e += 0.5 * r[i] * r[i];
            }
        if (!std::isfinite(e)) throw DivergenceError("energy became non-finite");
        rep.energy_trace.push_back(e);
        rep.iterations_run = k + 1;
        if (k > 0 && e > rep.energy_trace[k - 1]) {
            if (++rising >= 10)
                throw DivergenceError("energy increased for 10 consecutive iterations (iteration " +
                                      std::to_string(k) + "); reduce tau");
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

        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x) {
                const std::size_t i = y * w + x;
                if (r[i] == 0.0) continue;
                const Point2 p{x + res.field.ux[i], y + res.field.uy[i]};
                const Vec2 g = sample_gradient(te, p);
                res.field.ux[i] -= cfg.tau * r[i] * g.x;
                res.field.uy[i] -= cfg.tau * r[i] * g.y;
            }
        for (std::size_t pass = 0; pass < cfg.smoothing_passes; ++pass) smooth_grid(res.field, cfg.lambda);
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x) {
                const std::size_t i = y * w + x;
                res.field.ux[i] = std::clamp(x + res.field.ux[i], 0.0, max_x) - x;
                res.field.uy[i] = std::clamp(y + res.field.uy[i], 0.0, max_y) - y;
            }
    }

    res.warped = warp_image(te, res.field);
    rep.msd_before = msd(te, re);
    rep.msd_after = msd(res.warped, re);
    rep.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return res;
}

}  // namespace meshreg
