#pragma once

#include "meshreg/field.hpp"
#include "meshreg/image.hpp"
#include "meshreg/registration.hpp"

namespace meshreg {

using PixelField = DenseField;

struct PixelRegistrationResult {
    PixelField field;
    ImageGrid warped;
    RegistrationReport report;
};

/// Pixel-grid counterpart of register_images(): one displacement per pixel,
/// residual times analytic template gradient as the descent direction, then
/// smoothing_passes rounds of 4-neighbour umbrella averaging with weight
/// lambda. Same stopping and divergence rules as the mesh solver; the
/// gradient source setting is ignored.
PixelRegistrationResult register_pixelwise(const ImageGrid& re, const ImageGrid& te,
                                           const SolverConfig& cfg);

inline PixelRegistrationResult register_pixelwise(const ImageGrid& re, const ImageGrid& te,
                                                  double tau, double lambda,
                                                  std::size_t iterations) {
    SolverConfig cfg;
    cfg.tau = tau;
    cfg.lambda = lambda;
    cfg.max_iterations = iterations;
    return register_pixelwise(re, te, cfg);
}

/// Grid smoothing passes whose diffusion length per iteration matches one
/// mesh smoothing pass: the mean squared edge length of `mesh` in pixels,
/// rounded, at least 1.
std::size_t matched_pixel_passes(const TriMesh& mesh);

/// ((1 - lambda) I + lambda A4) applied once, where A4 averages the available
/// 4-neighbours of each pixel.
void smooth_grid(PixelField& field, double lambda);

}  // namespace meshreg
