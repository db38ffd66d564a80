#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "meshreg/geometry.hpp"

namespace meshreg {

/// Row-major scalar image with nominal intensity range [0, 255].
///
/// Pixel (x, y) has its center at continuous coordinate (x, y); x is the
/// column and y the row. Instances are immutable once constructed except
/// through at(), which exists for building images in place.
class ImageGrid {
public:
    ImageGrid() = default;
    ImageGrid(std::size_t width, std::size_t height, double fill = 0.0);
    ImageGrid(std::size_t width, std::size_t height, std::vector<double> data);

    std::size_t width() const { return width_; }
    std::size_t height() const { return height_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double operator()(std::size_t x, std::size_t y) const { return data_[y * width_ + x]; }
    double& at(std::size_t x, std::size_t y) { return data_[y * width_ + x]; }

    std::span<const double> data() const { return data_; }
    std::span<double> mutable_data() { return data_; }

    bool same_shape(const ImageGrid& o) const { return width_ == o.width_ && height_ == o.height_; }

    /// Clamp a point into [0, width-1] x [0, height-1].
    Point2 clamp(const Point2& p) const;
    bool contains(const Point2& p) const;

private:
    std::size_t width_ = 0;
    std::size_t height_ = 0;
    std::vector<double> data_;
};

/// Catmull-Rom bicubic interpolation. Points outside the image are clamped
/// to the border first, so sample(img, p) == sample(img, img.clamp(p)).
double sample(const ImageGrid& img, const Point2& p);

/// Analytic derivative of the interpolant used by sample(). Components in
/// which p lies outside the image are zero (the clamped surface is flat there).
Vec2 sample_gradient(const ImageGrid& img, const Point2& p);

/// Mean squared intensity difference over all pixels.
double msd(const ImageGrid& a, const ImageGrid& b);

/// Separable Gaussian blur with border replication.
ImageGrid gaussian_blur(const ImageGrid& img, double sigma);

/// Central-difference gradient magnitude at every pixel.
ImageGrid gradient_magnitude(const ImageGrid& img);

// I/O. PGM (P2/P5, maxval <= 65535) and PNG are decoded by content, not by
// extension; intensities are scaled so that maxval maps to 255.
ImageGrid load_image(const std::filesystem::path& path);
ImageGrid decode_pgm(std::span<const unsigned char> bytes);
ImageGrid decode_png(std::span<const unsigned char> bytes);

/// Writes 8-bit binary PGM (P5); intensities rounded and clamped to [0, 255].
void save_pgm(const ImageGrid& img, const std::filesystem::path& path);
/// Writes 8-bit grayscale PNG with the same rounding policy as save_pgm.
void save_png(const ImageGrid& img, const std::filesystem::path& path);
/// Chooses PNG for a ".png" extension, PGM otherwise.
void save_image(const ImageGrid& img, const std::filesystem::path& path);

/// Rounds and clamps an intensity to the 8-bit range used by the writers.
unsigned char to_byte(double v);

}  // namespace meshreg
