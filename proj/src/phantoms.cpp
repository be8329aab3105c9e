#include "xmct/phantoms.hpp"

#include "xmct/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "xmct/rng.hpp"

namespace xmct::phantoms {

bool EllipseSpec::contains(double x, double y) const {
    const double dx = x - cx, dy = y - cy;
    const double c = std::cos(rotation), s = std::sin(rotation);
    const double u = (dx * c + dy * s) / a;
    const double v = (-dx * s + dy * c) / b;
    return u * u + v * v <= 1.0;
}

bool EllipseSpec::visible_in(Modality m) const {
    if (visibility == Visibility::Both) return true;
    return m == Modality::Main ? visibility == Visibility::MainOnly : visibility == Visibility::AuxOnly;
}

bool EllipsoidSpec::section(double z, EllipseSpec& out) const {
    const double t = (z - cz) / c;
    if (t * t >= 1.0) return false;
    const double scale = std::sqrt(1.0 - t * t);
    out = profile;
    out.a *= scale;
    out.b *= scale;
    return true;
}

void PhantomRecipe::validate() const {
    auto bounded = [](Range r) { return r.lo >= 0.0 && r.hi <= 1.0 && r.lo <= r.hi; };
    if (volume_side <= 0) throw ConfigError("recipe: volume_side must be positive");
    if (depth <= 0) throw ConfigError("recipe: depth must be positive");
    if (ellipse_count_min < 0 || ellipse_count_max < ellipse_count_min)
        throw ConfigError("recipe: ellipse_count_range must satisfy 0 <= min <= max");
    if (!(semi_axis.lo > 0.0) || !bounded(semi_axis)) throw ConfigError("recipe: semi_axis range must lie in (0, 1]");
    if (!(depth_semi_axis.lo > 0.0) || depth_semi_axis.lo > depth_semi_axis.hi)
        throw ConfigError("recipe: depth_semi_axis range must be positive");
    if (!bounded(attenuation_main)) throw ConfigError("recipe: attenuation_main must lie in [0, 1]");
    if (!bounded(attenuation_aux)) throw ConfigError("recipe: attenuation_aux must lie in [0, 1]");
    if (aux_correlation < 0.0 || aux_correlation > 1.0) throw ConfigError("recipe: aux_correlation must lie in [0, 1]");
    if (main_only_fraction < 0.0 || aux_only_fraction < 0.0 || main_only_fraction + aux_only_fraction > 0.3 + 1e-12)
        throw ConfigError("recipe: exclusive fractions must be >= 0 and leave at least 70% shared");
    if (gate_attempts < 0) throw ConfigError("recipe: gate_attempts must be >= 0");
    if (!(gate_ssim.lo < gate_ssim.hi)) throw ConfigError("recipe: gate_ssim range must be increasing");
}

GridImage render_ellipses(int side, const std::vector<EllipseSpec>& ellipses, Modality m) {
    GridImage img(side, side);
    for (const auto& e : ellipses) {
        if (!e.visible_in(m)) continue;
        const double mu = m == Modality::Main ? e.attenuation_main : e.attenuation_aux;
        for (int r = 0; r < side; ++r) {
            const double y = 1.0 - (r + 0.5) * 2.0 / side;
            for (int c = 0; c < side; ++c) {
                const double x = (c + 0.5) * 2.0 / side - 1.0;
                if (e.contains(x, y)) img.at(r, c) += mu;
            }
        }
    }
    clip_inplace(img, 0.0, 1.0);
    return img;
}

namespace {

EllipseSpec draw_profile(const PhantomRecipe& rc, Rng& rng) {
    EllipseSpec e;
    e.cx = rng.uniform(-0.75, 0.75);
    e.cy = rng.uniform(-0.75, 0.75);
    e.a = rng.uniform(rc.semi_axis.lo, rc.semi_axis.hi);
    e.b = rng.uniform(rc.semi_axis.lo, rc.semi_axis.hi);
    e.rotation = rng.uniform(0.0, std::numbers::pi);
    e.attenuation_main = rng.uniform(rc.attenuation_main.lo, rc.attenuation_main.hi);
    const double span_main = rc.attenuation_main.hi - rc.attenuation_main.lo;
    const double rel = span_main > 0.0 ? (e.attenuation_main - rc.attenuation_main.lo) / span_main : 0.5;
    const bool same_range = rc.attenuation_aux.lo == rc.attenuation_main.lo && rc.attenuation_aux.hi == rc.attenuation_main.hi;
    const double mapped =
        same_range ? e.attenuation_main : rc.attenuation_aux.lo + rel * (rc.attenuation_aux.hi - rc.attenuation_aux.lo);
    const double indep = rng.uniform(rc.attenuation_aux.lo, rc.attenuation_aux.hi);
    e.attenuation_aux = rc.aux_correlation * mapped + (1.0 - rc.aux_correlation) * indep;
    return e;
}

}  // namespace

GridImage sample_prior_slice(const PhantomRecipe& recipe, std::uint64_t seed) {
    recipe.validate();
    Rng rng(seed);
    const int n = rng.integer(recipe.ellipse_count_min, recipe.ellipse_count_max);
    std::vector<EllipseSpec> ellipses;
    ellipses.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) ellipses.push_back(draw_profile(recipe, rng));
    return render_ellipses(recipe.volume_side, ellipses, Modality::Main);
}

std::vector<EllipsoidSpec> sample_ellipsoids(const PhantomRecipe& recipe, std::uint64_t seed) {
    recipe.validate();
    Rng rng(seed);
    // A slice crosses an ellipsoid with probability ~c, so scale the per-slice count by 1/mean(c).
    const double mean_c = 0.5 * (recipe.depth_semi_axis.lo + recipe.depth_semi_axis.hi);
    const int per_slice = rng.integer(recipe.ellipse_count_min, recipe.ellipse_count_max);
    const int n = static_cast<int>(std::lround(per_slice / std::min(1.0, mean_c)));
    std::vector<EllipsoidSpec> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        EllipsoidSpec e;
        e.profile = draw_profile(recipe, rng);
        e.cz = rng.uniform(-1.0, 1.0);
        e.c = rng.uniform(recipe.depth_semi_axis.lo, recipe.depth_semi_axis.hi);
        out.push_back(e);
    }
    // Exact exclusive counts (floored) keep the shared fraction >= 1 - main_only - aux_only.
    const int n_main_only = static_cast<int>(std::floor(recipe.main_only_fraction * n));
    const int n_aux_only = static_cast<int>(std::floor(recipe.aux_only_fraction * n));
    const auto picks = rng.sample_without_replacement(n, n_main_only + n_aux_only);
    for (std::size_t i = 0; i < picks.size(); ++i)
        out[static_cast<std::size_t>(picks[i])].profile.visibility =
            static_cast<int>(i) < n_main_only ? Visibility::MainOnly : Visibility::AuxOnly;
    return out;
}

double slice_depth(int k, int depth) { return (k + 0.5) * 2.0 / depth - 1.0; }

PairedVolume render_paired_volume(const PhantomRecipe& recipe, const std::vector<EllipsoidSpec>& ellipsoids) {
    PairedVolume pv;
    pv.ellipsoids = ellipsoids;
    pv.main = GridVolume(recipe.depth, recipe.volume_side);
    pv.aux = GridVolume(recipe.depth, recipe.volume_side);
#pragma omp parallel for schedule(static)
    for (int k = 0; k < recipe.depth; ++k) {
        const double z = slice_depth(k, recipe.depth);
        std::vector<EllipseSpec> sec;
        for (const auto& e : ellipsoids) {
            EllipseSpec s;
            if (e.section(z, s)) sec.push_back(s);
        }
        pv.main[static_cast<std::size_t>(k)] = render_ellipses(recipe.volume_side, sec, Modality::Main);
        pv.aux[static_cast<std::size_t>(k)] = render_ellipses(recipe.volume_side, sec, Modality::Aux);
    }
    return pv;
}

int gate_violations(const PhantomRecipe& recipe, const PairedVolume& volume) {
    int bad = 0;
    for (int k = 0; k < volume.main.depth(); ++k) {
        const double q = metrics::ssim(volume.aux[static_cast<std::size_t>(k)], volume.main[static_cast<std::size_t>(k)]);
        bad += !(q > recipe.gate_ssim.lo && q < recipe.gate_ssim.hi);
    }
    return bad;
}

PairedVolume generate_paired_volume(const PhantomRecipe& recipe, std::uint64_t seed) {
    PairedVolume best = render_paired_volume(recipe, sample_ellipsoids(recipe, seed));
    if (recipe.gate_attempts == 0) return best;
    int best_bad = gate_violations(recipe, best);
    for (int attempt = 1; attempt < recipe.gate_attempts && best_bad > 0; ++attempt) {
        auto v = render_paired_volume(recipe, sample_ellipsoids(recipe, mix_seed(seed, static_cast<std::uint64_t>(attempt))));
        const int bad = gate_violations(recipe, v);
        if (bad < best_bad) {
            best = std::move(v);
            best_bad = bad;
        }
    }
    return best;
}

std::pair<GridImage, GridImage> generate_paired_slice(const PhantomRecipe& recipe, std::uint64_t seed) {
    const auto ellipsoids = sample_ellipsoids(recipe, seed);
    Rng rng(mix_seed(seed, 0x51ce));
    const double z = rng.uniform(-0.8, 0.8);
    std::vector<EllipseSpec> sec;
    for (const auto& e : ellipsoids) {
        EllipseSpec s;
        if (e.section(z, s)) sec.push_back(s);
    }
    return {render_ellipses(recipe.volume_side, sec, Modality::Main),
            render_ellipses(recipe.volume_side, sec, Modality::Aux)};
}

}  // namespace xmct::phantoms
