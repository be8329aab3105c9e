#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "xmct/grid.hpp"

namespace xmct::phantoms {

enum class Visibility { Both, MainOnly, AuxOnly };
enum class Modality { Main, Aux };

/// One ellipse in normalized image coordinates ([-1, 1]^2, y up).
struct EllipseSpec {
    double cx = 0.0, cy = 0.0;
    double a = 0.5, b = 0.5;  // semi-axes
    double rotation = 0.0;    // radians
    double attenuation_main = 1.0;
    double attenuation_aux = 1.0;
    Visibility visibility = Visibility::Both;

    bool contains(double x, double y) const;
    bool visible_in(Modality m) const;
};

/// Ellipsoid extruded along the slice axis; slicing at normalized depth z yields an EllipseSpec.
struct EllipsoidSpec {
    EllipseSpec profile;
    double cz = 0.0;
    double c = 0.5;  // semi-axis along the slice axis

    /// Cross-section at depth z, or nothing when the plane misses the ellipsoid.
    bool section(double z, EllipseSpec& out) const;
};

struct Range {
    double lo = 0.0;
    double hi = 1.0;
};

struct PhantomRecipe {
    int volume_side = 64;
    int depth = 32;
    // Expected number of ellipses crossing one slice.
    int ellipse_count_min = 8;
    int ellipse_count_max = 14;
    Range semi_axis{0.06, 0.45};
    Range depth_semi_axis{0.2, 0.6};
    Range attenuation_main{0.15, 0.55};
    Range attenuation_aux{0.15, 0.55};
    // aux = rho * (main mapped into the aux range) + (1 - rho) * independent draw
    double aux_correlation = 0.4;
    double main_only_fraction = 0.15;
    double aux_only_fraction = 0.15;
    // Acceptance gate on generated pairs: every slice's SSIM(aux, main) must fall strictly
    // inside this band. Volumes are redrawn up to gate_attempts times; 0 disables the gate.
    Range gate_ssim{0.2, 0.98};
    int gate_attempts = 32;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Renders ellipses additively, clipped to [0, 1], using each ellipse's attenuation for `m`.
GridImage render_ellipses(int side, const std::vector<EllipseSpec>& ellipses, Modality m);

/// Training-distribution sample for the diffusion prior (main-modality contrast).
GridImage sample_prior_slice(const PhantomRecipe& recipe, std::uint64_t seed);

struct PairedVolume {
    GridVolume main;
    GridVolume aux;
    std::vector<EllipsoidSpec> ellipsoids;
};

std::vector<EllipsoidSpec> sample_ellipsoids(const PhantomRecipe& recipe, std::uint64_t seed);
PairedVolume render_paired_volume(const PhantomRecipe& recipe, const std::vector<EllipsoidSpec>& ellipsoids);
/// Number of slices whose modality SSIM falls outside recipe.gate_ssim.
int gate_violations(const PhantomRecipe& recipe, const PairedVolume& volume);
/// Draws a gated paired volume. Attempt 0 uses `seed`, later attempts mix_seed(seed, attempt);
/// if no attempt passes, the one with the fewest violations is returned.
PairedVolume generate_paired_volume(const PhantomRecipe& recipe, std::uint64_t seed);

/// Normalized depth of slice k in a volume of `depth` slices.
double slice_depth(int k, int depth);

/// Single registered (main, aux) slice through a freshly sampled volume at a seed-chosen depth.
std::pair<GridImage, GridImage> generate_paired_slice(const PhantomRecipe& recipe, std::uint64_t seed);

}  // namespace xmct::phantoms
