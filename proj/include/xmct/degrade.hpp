#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "xmct/grid.hpp"
#include "xmct/phantoms.hpp"

namespace xmct::degrade {

struct DegradationSpec {
    int num_views = 256;
    double noise_relative_sigma = 0.0;
    double blur_sigma = 0.0;              // pixels
    double sampling_keep_fraction = 1.0;  // fraction of detector bins kept per view
    std::uint64_t seed = 0;

    void validate() const;
    bool operator==(const DegradationSpec&) const = default;
};

struct PairedSample {
    GridImage degraded_main;
    GridImage degraded_aux;
    GridImage ideal_main;
    DegradationSpec spec_main;
    DegradationSpec spec_aux;
};

/// Normalized Gaussian blur with periodic boundaries (preserves the image mean).
GridImage gaussian_blur(const GridImage& img, double sigma);

/// Fixed pipeline: project at spec.num_views -> zero-fill dropped detector bins -> add
/// measurement noise -> FBP (Hann) -> Gaussian blur. Deterministic given spec.seed.
GridImage degraded_reconstruction(const GridImage& slice, const DegradationSpec& spec);

/// Produces one registered (main, aux) slice pair for a sample seed.
using SliceSource = std::function<std::pair<GridImage, GridImage>(std::uint64_t sample_seed)>;

/// Per-sample seed = mix_seed(seed, index). The grid entry is drawn uniformly; spec seeds
/// are re-derived from the sample seed so noise and masks differ between samples.
std::vector<PairedSample> build_paired_dataset(const phantoms::PhantomRecipe& recipe, const DegradationSpec& ideal_spec,
                                               const std::vector<std::pair<DegradationSpec, DegradationSpec>>& spec_grid,
                                               int count, std::uint64_t seed, const SliceSource& source = {});

}  // namespace xmct::degrade
