#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "meshreg/field.hpp"
#include "meshreg/image.hpp"

namespace meshreg::synthetic {

/// Smooth random texture: a sum of Gaussian blobs of mixed sign and scale,
/// soft-clipped into roughly [20, 235].
ImageGrid textured_image(std::size_t width, std::size_t height, std::uint64_t seed);

/// Displacement d(p) = peak * exp(-|p - center|^2 / (2 sigma^2)).
DenseField gaussian_bump_field(std::size_t width, std::size_t height, const Vec2& center,
                               double sigma, const Vec2& peak);

/// Sum of fields of equal size.
DenseField add_fields(const DenseField& a, const DenseField& b);

/// Consecutive z-slices, `slice_gap` apart, through a smooth random volume of
/// Gaussian blobs (same intensity mapping as textured_image). Each slice is
/// additionally backward-warped by an accumulated in-plane motion that gains
/// one random bump (peak `max_shift` pixels) per slice, so neighbouring slices
/// differ by both deformation and anatomy-like content change.
std::vector<ImageGrid> slice_stack(std::size_t count, std::size_t width, std::size_t height,
                                   double max_shift, std::uint64_t seed,
                                   double slice_gap = 2.0);

}  // namespace meshreg::synthetic
