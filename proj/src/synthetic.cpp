#include "meshreg/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "meshreg/errors.hpp"

namespace meshreg::synthetic {

namespace {

// mt19937_64 output is fully specified; the std distributions are not, so
// uniform reals are derived by hand to keep fixtures identical across libstdc++/libc++.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    double uniform(double lo, double hi) {
        const double u = static_cast<double>(engine_() >> 11) * (1.0 / 9007199254740992.0);
        return lo + (hi - lo) * u;
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace

ImageGrid textured_image(std::size_t width, std::size_t height, std::uint64_t seed) {
    Rng rng(seed);
    const double w = static_cast<double>(width), h = static_cast<double>(height);
    const int blobs = static_cast<int>(std::max(8.0, w * h / 400.0));
    struct Blob {
        double cx, cy, sigma, amp;
    };
    std::vector<Blob> list;
    list.reserve(blobs);
    for (int b = 0; b < blobs; ++b)
        list.push_back({rng.uniform(-0.05 * w, 1.05 * w), rng.uniform(-0.05 * h, 1.05 * h),
                        rng.uniform(7.0, 16.0), rng.uniform(-1.0, 1.0)});

    std::vector<double> data(width * height, 0.0);
    for (const Blob& b : list) {
        const double r = 3.5 * b.sigma;
        const auto x0 = static_cast<long>(std::max(0.0, std::floor(b.cx - r)));
        const auto x1 = static_cast<long>(std::min(w - 1, std::ceil(b.cx + r)));
        const auto y0 = static_cast<long>(std::max(0.0, std::floor(b.cy - r)));
        const auto y1 = static_cast<long>(std::min(h - 1, std::ceil(b.cy + r)));
        const double inv = 1.0 / (2.0 * b.sigma * b.sigma);
        for (long y = y0; y <= y1; ++y)
            for (long x = x0; x <= x1; ++x) {
                const double dx = x - b.cx, dy = y - b.cy;
                data[y * width + x] += b.amp * std::exp(-(dx * dx + dy * dy) * inv);
            }
    }
    double mean = 0.0, var = 0.0;
    for (double v : data) mean += v;
    mean /= static_cast<double>(data.size());
    for (double v : data) var += (v - mean) * (v - mean);
    const double sd = std::max(std::sqrt(var / static_cast<double>(data.size())), 1e-12);
    // Soft clipping keeps the texture smooth while filling most of [0, 255].
    for (double& v : data) v = 127.5 + 90.0 * std::tanh(0.7 * (v - mean) / sd);
    return ImageGrid(width, height, std::move(data));
}

DenseField gaussian_bump_field(std::size_t width, std::size_t height, const Vec2& center,
                               double sigma, const Vec2& peak) {
    if (!(sigma > 0.0)) throw ConfigError("bump sigma must be positive");
    DenseField f(width, height);
    const double inv = 1.0 / (2.0 * sigma * sigma);
    for (std::size_t y = 0; y < height; ++y)
        for (std::size_t x = 0; x < width; ++x) {
            const Vec2 d = Vec2{static_cast<double>(x), static_cast<double>(y)} - center;
            const double g = std::exp(-norm2(d) * inv);
            f.ux[y * width + x] = peak.x * g;
            f.uy[y * width + x] = peak.y * g;
        }
    return f;
}

DenseField add_fields(const DenseField& a, const DenseField& b) {
    if (a.width != b.width || a.height != b.height) throw ConfigError("field sizes differ");
    DenseField out = a;
    for (std::size_t i = 0; i < out.ux.size(); ++i) {
        out.ux[i] += b.ux[i];
        out.uy[i] += b.uy[i];
    }
    return out;
}

std::vector<ImageGrid> slice_stack(std::size_t count, std::size_t width, std::size_t height,
                                   double max_shift, std::uint64_t seed, double slice_gap) {
    Rng rng(seed);
    const double w = static_cast<double>(width), h = static_cast<double>(height);
    const double depth = slice_gap * static_cast<double>(count);

    // Smooth random volume; slices are cut along z.
    struct Blob {
        double cx, cy, cz, sigma, amp;
    };
    const int blobs = static_cast<int>(std::max(8.0, w * h / 400.0 * (1.0 + depth / 40.0)));
    std::vector<Blob> list;
    list.reserve(blobs);
    for (int b = 0; b < blobs; ++b)
        list.push_back({rng.uniform(-0.05 * w, 1.05 * w), rng.uniform(-0.05 * h, 1.05 * h),
                        rng.uniform(-20.0, depth + 20.0), rng.uniform(7.0, 16.0),
                        rng.uniform(-1.0, 1.0)});

    auto cut = [&](double z) {
        std::vector<double> data(width * height, 0.0);
        for (const Blob& b : list) {
            const double dz = z - b.cz;
            const double inv = 1.0 / (2.0 * b.sigma * b.sigma);
            const double az = b.amp * std::exp(-dz * dz * inv);
            if (std::abs(az) < 1e-4) continue;
            const double r = 3.5 * b.sigma;
            const auto x0 = static_cast<long>(std::max(0.0, std::floor(b.cx - r)));
            const auto x1 = static_cast<long>(std::min(w - 1, std::ceil(b.cx + r)));
            const auto y0 = static_cast<long>(std::max(0.0, std::floor(b.cy - r)));
            const auto y1 = static_cast<long>(std::min(h - 1, std::ceil(b.cy + r)));
            for (long y = y0; y <= y1; ++y)
                for (long x = x0; x <= x1; ++x) {
                    const double dx = x - b.cx, dy = y - b.cy;
                    data[y * width + x] += az * std::exp(-(dx * dx + dy * dy) * inv);
                }
        }
        return data;
    };

    std::vector<std::vector<double>> raw;
    for (std::size_t k = 0; k < count; ++k) raw.push_back(cut(slice_gap * static_cast<double>(k)));
    // One normalisation for the whole volume so slices stay comparable.
    double mean = 0.0, var = 0.0, n = 0.0;
    for (const auto& s : raw)
        for (double v : s) mean += v, n += 1.0;
    mean /= n;
    for (const auto& s : raw)
        for (double v : s) var += (v - mean) * (v - mean);
    const double sd = std::max(std::sqrt(var / n), 1e-12);

    std::vector<ImageGrid> stack;
    DenseField motion(width, height);
    for (std::size_t k = 0; k < count; ++k) {
        for (double& v : raw[k]) v = 127.5 + 90.0 * std::tanh(0.7 * (v - mean) / sd);
        ImageGrid slice(width, height, std::move(raw[k]));
        if (k > 0) {
            const Vec2 center{rng.uniform(0.3 * w, 0.7 * w), rng.uniform(0.3 * h, 0.7 * h)};
            const double angle = rng.uniform(0.0, 2.0 * M_PI);
            const Vec2 peak{max_shift * std::cos(angle), max_shift * std::sin(angle)};
            const double sigma = rng.uniform(0.15, 0.25) * std::min(w, h);
            motion = add_fields(motion, gaussian_bump_field(width, height, center, sigma, peak));
            slice = warp_image(slice, motion);
        }
        stack.push_back(std::move(slice));
    }
    return stack;
}

}  // namespace meshreg::synthetic
