#include "meshreg/image.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "meshreg/errors.hpp"

namespace meshreg {

ImageGrid::ImageGrid(std::size_t width, std::size_t height, double fill)
    : ImageGrid(width, height, std::vector<double>(width * height, fill)) {}

ImageGrid::ImageGrid(std::size_t width, std::size_t height, std::vector<double> data)
    : width_(width), height_(height), data_(std::move(data)) {
    if (width == 0 || height == 0)
        throw ConfigError("image dimensions must be positive");
    if (data_.size() != width * height)
        throw ConfigError("image data length " + std::to_string(data_.size()) +
                          " does not match " + std::to_string(width) + "x" +
                          std::to_string(height));
    for (double v : data_)
        if (!std::isfinite(v)) throw ConfigError("image contains non-finite intensity");
}

Point2 ImageGrid::clamp(const Point2& p) const {
    return {std::clamp(p.x, 0.0, static_cast<double>(width_ - 1)),
            std::clamp(p.y, 0.0, static_cast<double>(height_ - 1))};
}

bool ImageGrid::contains(const Point2& p) const {
    return p.x >= 0.0 && p.y >= 0.0 && p.x <= static_cast<double>(width_ - 1) &&
           p.y <= static_cast<double>(height_ - 1);
}

namespace {

// Catmull-Rom weights for taps at offsets -1, 0, 1, 2 and parameter t in [0, 1).
std::array<double, 4> cr_weights(double t) {
    const double t2 = t * t, t3 = t2 * t;
    return {0.5 * (-t3 + 2.0 * t2 - t), 0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
            0.5 * (-3.0 * t3 + 4.0 * t2 + t), 0.5 * (t3 - t2)};
}

std::array<double, 4> cr_weight_derivs(double t) {
    const double t2 = t * t;
    return {0.5 * (-3.0 * t2 + 4.0 * t - 1.0), 0.5 * (9.0 * t2 - 10.0 * t),
            0.5 * (-9.0 * t2 + 8.0 * t + 1.0), 0.5 * (3.0 * t2 - 2.0 * t)};
}

struct Taps {
    std::array<std::size_t, 4> idx;
    double t;
};

Taps taps_for(double coord, std::size_t n) {
    const double maxc = static_cast<double>(n - 1);
    const double c = std::clamp(coord, 0.0, maxc);
    double base = std::floor(c);
    // Keep t in [0,1) while allowing the last sample to be hit exactly.
    if (base >= maxc && n > 1) base = maxc - 1.0;
    if (n == 1) base = 0.0;
    Taps taps{};
    taps.t = c - base;
    const auto b = static_cast<long>(base);
    for (int k = 0; k < 4; ++k) {
        const long i = std::clamp<long>(b - 1 + k, 0, static_cast<long>(n) - 1);
        taps.idx[k] = static_cast<std::size_t>(i);
    }
    return taps;
}

}  // namespace

double sample(const ImageGrid& img, const Point2& p) {
    const Taps tx = taps_for(p.x, img.width());
    const Taps ty = taps_for(p.y, img.height());
    const auto wx = cr_weights(tx.t);
    const auto wy = cr_weights(ty.t);
    double acc = 0.0;
    for (int j = 0; j < 4; ++j) {
        double row = 0.0;
        for (int i = 0; i < 4; ++i) row += wx[i] * img(tx.idx[i], ty.idx[j]);
        acc += wy[j] * row;
    }
    return acc;
}

Vec2 sample_gradient(const ImageGrid& img, const Point2& p) {
    const Taps tx = taps_for(p.x, img.width());
    const Taps ty = taps_for(p.y, img.height());
    const auto wx = cr_weights(tx.t);
    const auto wy = cr_weights(ty.t);
    const auto dx = cr_weight_derivs(tx.t);
    const auto dy = cr_weight_derivs(ty.t);
    double gx = 0.0, gy = 0.0;
    for (int j = 0; j < 4; ++j) {
        double row_v = 0.0, row_d = 0.0;
        for (int i = 0; i < 4; ++i) {
            const double v = img(tx.idx[i], ty.idx[j]);
            row_v += wx[i] * v;
            row_d += dx[i] * v;
        }
        gx += wy[j] * row_d;
        gy += dy[j] * row_v;
    }
    const double maxx = static_cast<double>(img.width() - 1);
    const double maxy = static_cast<double>(img.height() - 1);
    if (p.x < 0.0 || p.x > maxx || img.width() == 1) gx = 0.0;
    if (p.y < 0.0 || p.y > maxy || img.height() == 1) gy = 0.0;
    return {gx, gy};
}

double msd(const ImageGrid& a, const ImageGrid& b) {
    if (!a.same_shape(b))
        throw ConfigError("msd: image dimensions differ");
    const auto da = a.data();
    const auto db = b.data();
    double acc = 0.0;
    for (std::size_t i = 0; i < da.size(); ++i) {
        const double d = da[i] - db[i];
        acc += d * d;
    }
    return acc / static_cast<double>(da.size());
}

ImageGrid gaussian_blur(const ImageGrid& img, double sigma) {
    if (sigma <= 0.0) return img;
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> kernel(2 * radius + 1);
    double sum = 0.0;
    for (int k = -radius; k <= radius; ++k) {
        kernel[k + radius] = std::exp(-0.5 * k * k / (sigma * sigma));
        sum += kernel[k + radius];
    }
    for (double& k : kernel) k /= sum;

    const long w = static_cast<long>(img.width()), h = static_cast<long>(img.height());
    ImageGrid tmp(img.width(), img.height());
    for (long y = 0; y < h; ++y)
        for (long x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int k = -radius; k <= radius; ++k)
                acc += kernel[k + radius] * img(std::clamp(x + k, 0L, w - 1), y);
            tmp.at(x, y) = acc;
        }
    ImageGrid out(img.width(), img.height());
    for (long y = 0; y < h; ++y)
        for (long x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int k = -radius; k <= radius; ++k)
                acc += kernel[k + radius] * tmp(x, std::clamp(y + k, 0L, h - 1));
            out.at(x, y) = acc;
        }
    return out;
}

ImageGrid gradient_magnitude(const ImageGrid& img) {
    const long w = static_cast<long>(img.width()), h = static_cast<long>(img.height());
    ImageGrid out(img.width(), img.height());
    for (long y = 0; y < h; ++y)
        for (long x = 0; x < w; ++x) {
            const double gx =
                0.5 * (img(std::min(x + 1, w - 1), y) - img(std::max(x - 1, 0L), y));
            const double gy =
                0.5 * (img(x, std::min(y + 1, h - 1)) - img(x, std::max(y - 1, 0L)));
            out.at(x, y) = std::hypot(gx, gy);
        }
    return out;
}

unsigned char to_byte(double v) {
    return static_cast<unsigned char>(std::clamp(std::lround(v), 0L, 255L));
}

}  // namespace meshreg
