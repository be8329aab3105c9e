#pragma once

#include <cstdint>
#include <vector>

#include "xmct/grid.hpp"

namespace xmct::tomo {

/// Parallel-beam acquisition: defines the forward operator A.
struct ProjectionGeometry {
    std::vector<double> angles;  // radians, strictly increasing in [0, pi)
    int num_detector_bins = 0;
    double detector_pitch = 1.0;
    int image_side = 0;
    double pixel_pitch = 1.0;

    int num_angles() const { return static_cast<int>(angles.size()); }
    /// Throws ConfigError when an invariant is violated.
    void validate() const;
    bool operator==(const ProjectionGeometry&) const = default;
};

/// Uniform angles over [0, pi) starting at 0; detector of ceil(side*sqrt(2)) bins at pixel pitch.
ProjectionGeometry make_parallel_geometry(int image_side, int num_views, double pixel_pitch = 1.0);

struct Sinogram {
    ProjectionGeometry geometry;
    std::vector<double> values;  // num_angles x num_detector_bins, angle-major

    Sinogram() = default;
    explicit Sinogram(ProjectionGeometry g);
    double& at(int angle, int bin) { return values[static_cast<std::size_t>(angle) * geometry.num_detector_bins + bin]; }
    double at(int angle, int bin) const {
        return values[static_cast<std::size_t>(angle) * geometry.num_detector_bins + bin];
    }
};

enum class FilterKind { Ramp, Hann };

Sinogram forward_project(const GridImage& img, const ProjectionGeometry& geom);
GridImage back_project(const Sinogram& sino);
GridImage fbp_reconstruct(const Sinogram& sino, FilterKind filter = FilterKind::Hann);
Sinogram add_noise(const Sinogram& sino, double relative_sigma, std::uint64_t seed);

}  // namespace xmct::tomo

namespace xmct::tomo {

/// Largest eigenvalue of A^T A by power iteration; used to pick stable gradient step sizes.
double operator_norm_sq(const ProjectionGeometry& geom, int iterations = 30);

}  // namespace xmct::tomo
