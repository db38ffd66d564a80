#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "meshreg/field.hpp"
#include "meshreg/image.hpp"
#include "meshreg/trimesh.hpp"

namespace meshreg {

using DisplacementField = std::vector<Vec2>;

/// Where the template gradient at the warped nodes comes from.
enum class GradientSource {
    /// Per-vertex gradient of the warped node samples over the mesh
    /// (area-weighted triangle gradients). The solver default.
    kMesh,
    /// Analytic derivative of the bicubic template interpolant. This makes
    /// energy_gradient() the exact derivative of energy().
    kAnalytic,
};

const char* to_string(GradientSource s);
GradientSource gradient_source_from_string(const std::string& s);

struct SolverConfig {
    double tau = 0.005;
    double lambda = 0.8;
    std::size_t max_iterations = 100;
    std::size_t smoothing_passes = 1;
    double energy_tolerance = 1e-6;
    GradientSource gradient = GradientSource::kMesh;

    /// Throws ConfigError unless tau > 0, 0 < lambda < 1, max_iterations >= 1.
    void validate() const;
};

struct RegistrationReport {
    std::string engine = "mesh";
    std::size_t iterations_run = 0;
    std::vector<double> energy_trace;
    double msd_before = 0.0;
    double msd_after = 0.0;
    double wall_time = 0.0;  // seconds
    std::size_t unknowns = 0;
    bool converged = false;
    SolverConfig config;
};

/// Te sampled at V_i + u_i.
std::vector<double> warp_sample(const ImageGrid& te, std::span<const Vec2> vertices,
                                std::span<const Vec2> u);

/// Te(V_i + u_i) - Re(V_i) at every node.
std::vector<double> residuals(const ImageGrid& re, const ImageGrid& te, const TriMesh& mesh,
                              std::span<const Vec2> u);

/// 1/2 * sum_i (Te(V_i + u_i) - Re(V_i))^2 over the mesh nodes.
double energy(const ImageGrid& re, const ImageGrid& te, const TriMesh& mesh,
              std::span<const Vec2> u);

/// residual_i * grad Te(V_i + u_i) at every node.
DisplacementField energy_gradient(const ImageGrid& re, const ImageGrid& te, const TriMesh& mesh,
                                  std::span<const Vec2> u,
                                  GradientSource source = GradientSource::kMesh);

/// One update: u0 = u - tau * grad, u1 = ((1-lambda) I + lambda A)^passes u0,
/// then V + u1 is clamped into the image rectangle [0, max_x] x [0, max_y].
/// Throws DivergenceError on a non-finite gradient.
DisplacementField step(std::span<const Vec2> u, std::span<const Vec2> grad,
                       const SolverConfig& cfg, const LaplacianMatrix& L,
                       std::span<const Vec2> vertices, double max_x, double max_y);

struct RegistrationResult {
    DisplacementField u;
    DenseField field;
    ImageGrid warped;
    RegistrationReport report;
};

/// Gradient descent with diffusion smoothing from u = 0. Stops after
/// max_iterations, or once the relative energy change over a 5-iteration
/// window drops below energy_tolerance, or at zero energy. Throws
/// DivergenceError after 10 consecutive energy increases.
RegistrationResult register_images(const ImageGrid& re, const ImageGrid& te, const TriMesh& mesh,
                                   const SolverConfig& cfg);

}  // namespace meshreg
