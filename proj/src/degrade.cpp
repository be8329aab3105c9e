#include "xmct/degrade.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "xmct/rng.hpp"
#include "xmct/tomo.hpp"

namespace xmct::degrade {

void DegradationSpec::validate() const {
    if (num_views < 2) throw ConfigError("degradation: num_views must be >= 2");
    if (!(noise_relative_sigma >= 0.0)) throw ConfigError("degradation: noise_relative_sigma must be >= 0");
    if (!(blur_sigma >= 0.0)) throw ConfigError("degradation: blur_sigma must be >= 0");
    if (!(sampling_keep_fraction > 0.0 && sampling_keep_fraction <= 1.0))
        throw ConfigError("degradation: sampling_keep_fraction must lie in (0, 1]");
}

GridImage gaussian_blur(const GridImage& img, double sigma) {
    if (!(sigma >= 0.0)) throw DomainError("gaussian_blur: sigma must be >= 0");
    if (sigma == 0.0) return img;
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
    double ksum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        const double v = std::exp(-0.5 * i * i / (sigma * sigma));
        k[static_cast<std::size_t>(i + radius)] = v;
        ksum += v;
    }
    for (auto& v : k) v /= ksum;

    const int w = img.width, h = img.height;
    auto wrap = [](int i, int n) { return ((i % n) + n) % n; };
    GridImage tmp(w, h), out(w, h);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            double s = 0.0;
            for (int j = -radius; j <= radius; ++j) s += k[static_cast<std::size_t>(j + radius)] * img.at(r, wrap(c + j, w));
            tmp.at(r, c) = s;
        }
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            double s = 0.0;
            for (int j = -radius; j <= radius; ++j) s += k[static_cast<std::size_t>(j + radius)] * tmp.at(wrap(r + j, h), c);
            out.at(r, c) = s;
        }
    return out;
}

GridImage degraded_reconstruction(const GridImage& slice, const DegradationSpec& spec) {
    spec.validate();
    if (slice.width != slice.height) throw DimensionError("degraded_reconstruction: slice must be square");
    const auto geom = tomo::make_parallel_geometry(slice.width, spec.num_views);
    auto sino = tomo::forward_project(slice, geom);

    if (spec.sampling_keep_fraction < 1.0) {
        const int bins = geom.num_detector_bins;
        const int keep = std::max(1, static_cast<int>(std::lround(spec.sampling_keep_fraction * bins)));
        Rng rng(mix_seed(spec.seed, 1));
        for (int a = 0; a < geom.num_angles(); ++a) {
            std::vector<char> kept(static_cast<std::size_t>(bins), 0);
            for (int b : rng.sample_without_replacement(bins, keep)) kept[static_cast<std::size_t>(b)] = 1;
            for (int b = 0; b < bins; ++b)
                if (!kept[static_cast<std::size_t>(b)]) sino.at(a, b) = 0.0;
        }
    }
    sino = tomo::add_noise(sino, spec.noise_relative_sigma, mix_seed(spec.seed, 2));
    auto img = tomo::fbp_reconstruct(sino, tomo::FilterKind::Hann);
    return gaussian_blur(img, spec.blur_sigma);
}

std::vector<PairedSample> build_paired_dataset(const phantoms::PhantomRecipe& recipe, const DegradationSpec& ideal_spec,
                                               const std::vector<std::pair<DegradationSpec, DegradationSpec>>& spec_grid,
                                               int count, std::uint64_t seed, const SliceSource& source) {
    if (spec_grid.empty()) throw ConfigError("build_paired_dataset: spec_grid must not be empty");
    if (count < 0) throw ConfigError("build_paired_dataset: count must be >= 0");
    recipe.validate();
    ideal_spec.validate();
    for (const auto& [m, a] : spec_grid) {
        m.validate();
        a.validate();
    }

    const SliceSource slices = source ? source : [&recipe](std::uint64_t s) {
        return phantoms::generate_paired_slice(recipe, s);
    };

    std::vector<PairedSample> out(static_cast<std::size_t>(count));
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < count; ++i) {
        const std::uint64_t s = mix_seed(seed, static_cast<std::uint64_t>(i));
        auto [main, aux] = slices(mix_seed(s, 0));
        Rng pick(mix_seed(s, 1));
        const auto& entry = spec_grid[static_cast<std::size_t>(pick.integer(0, static_cast<int>(spec_grid.size()) - 1))];
        PairedSample& ps = out[static_cast<std::size_t>(i)];
        ps.spec_main = entry.first;
        ps.spec_main.seed = mix_seed(s, 2);
        ps.spec_aux = entry.second;
        ps.spec_aux.seed = mix_seed(s, 3);
        DegradationSpec ideal = ideal_spec;
        ideal.seed = mix_seed(s, 4);
        ps.ideal_main = degraded_reconstruction(main, ideal);
        ps.degraded_main = degraded_reconstruction(main, ps.spec_main);
        ps.degraded_aux = degraded_reconstruction(aux, ps.spec_aux);
    }
    Rng shuffler(mix_seed(seed, 0x5eed));
    std::shuffle(out.begin(), out.end(), shuffler.engine());
    return out;
}

}  // namespace xmct::degrade
