#include <doctest.h>

#include "xmct/metrics.hpp"
#include "xmct/phantoms.hpp"

using namespace xmct;
using namespace xmct::phantoms;

namespace {

PhantomRecipe small_recipe() {
    PhantomRecipe r;
    r.volume_side = 64;
    r.depth = 16;
    return r;
}

int count_differences(const GridImage& a, const GridImage& b) {
    int n = 0;
    for (std::size_t i = 0; i < a.size(); ++i) n += a.values[i] != b.values[i];
    return n;
}

}  // namespace

TEST_CASE("empty recipe renders zeros") {
    auto r = small_recipe();
    r.ellipse_count_min = r.ellipse_count_max = 0;
    r.gate_attempts = 0;
    for (double v : sample_prior_slice(r, 5).values) CHECK(v == 0.0);
    const auto vol = generate_paired_volume(r, 5);
    for (const auto& s : vol.main.slices)
        for (double v : s.values) CHECK(v == 0.0);
}

TEST_CASE("point-in-ellipse membership") {
    EllipseSpec e;
    e.a = e.b = 0.5;
    e.attenuation_main = 1.0;
    const auto img = render_ellipses(64, {e}, Modality::Main);
    CHECK(img.at(32, 32) == 1.0);
    CHECK(img.at(0, 0) == 0.0);
    CHECK(img.at(63, 63) == 0.0);
    // rotated thin ellipse: along its major axis inside, across it outside
    EllipseSpec thin{0.0, 0.0, 0.8, 0.05, 0.785398163397448, 1.0, 1.0};
    CHECK(thin.contains(0.4, 0.4));
    CHECK_FALSE(thin.contains(0.4, -0.4));
    // overlaps add and clip
    EllipseSpec half = e;
    half.attenuation_main = 0.7;
    CHECK(render_ellipses(64, {half, half}, Modality::Main).at(32, 32) == 1.0);
    CHECK(render_ellipses(64, {half}, Modality::Main).at(32, 32) == 0.7);
}

TEST_CASE("prior slices are deterministic and diverse") {
    const auto r = small_recipe();
    CHECK(sample_prior_slice(r, 11).values == sample_prior_slice(r, 11).values);
    int diverse = 0;
    for (std::uint64_t t = 0; t < 100; ++t) {
        const auto a = sample_prior_slice(r, 2 * t + 1000), b = sample_prior_slice(r, 2 * t + 1001);
        diverse += count_differences(a, b) >= static_cast<int>(a.size() / 100);
    }
    CHECK(diverse >= 99);
}

TEST_CASE("paired volumes: values, determinism, visibility mix") {
    const auto r = small_recipe();
    const auto a = generate_paired_volume(r, 77), b = generate_paired_volume(r, 77);
    REQUIRE(a.main.depth() == 16);
    REQUIRE(a.main.width() == 64);
    for (int k = 0; k < 16; ++k) {
        CHECK(a.main[k].values == b.main[k].values);
        CHECK(a.aux[k].values == b.aux[k].values);
        for (double v : a.main[k].values) CHECK((v >= 0.0 && v <= 1.0));
        for (double v : a.aux[k].values) CHECK((v >= 0.0 && v <= 1.0));
    }
    int both = 0, total = 0;
    for (std::uint64_t s = 0; s < 40; ++s)
        for (const auto& e : sample_ellipsoids(r, s)) {
            both += e.profile.visibility == Visibility::Both;
            ++total;
        }
    CHECK(static_cast<double>(both) / total >= 0.7 - 0.03);
}

TEST_CASE("equal contrast gives identical modalities") {
    auto r = small_recipe();
    r.attenuation_aux = r.attenuation_main;
    r.aux_correlation = 1.0;
    r.main_only_fraction = r.aux_only_fraction = 0.0;
    r.gate_attempts = 0;  // identical modalities sit outside the gate band by construction
    const auto v = generate_paired_volume(r, 3);
    for (int k = 0; k < v.main.depth(); ++k) CHECK(v.main[k].values == v.aux[k].values);
}

TEST_CASE("main-only ellipses are absent from the auxiliary modality") {
    EllipseSpec e{0.1, -0.2, 0.3, 0.2, 0.3, 0.6, 0.5, Visibility::MainOnly};
    const auto main = render_ellipses(64, {e}, Modality::Main), aux = render_ellipses(64, {e}, Modality::Aux);
    int support = 0;
    for (std::size_t i = 0; i < main.size(); ++i)
        if (main.values[i] > 0.0) {
            ++support;
            CHECK(aux.values[i] == 0.0);
        }
    CHECK(support > 100);

    EllipsoidSpec ell{e, 0.0, 0.8};
    auto r = small_recipe();
    const auto vol = render_paired_volume(r, {ell});
    for (int k = 0; k < vol.aux.depth(); ++k)
        for (double v : vol.aux[k].values) CHECK(v == 0.0);
}

TEST_CASE("shared geometry: both-visible supports are nonzero in both modalities") {
    const auto r = small_recipe();
    const auto ellipsoids = sample_ellipsoids(r, 21);
    const auto v = render_paired_volume(r, ellipsoids);
    for (int k = 0; k < r.depth; ++k) {
        const double z = slice_depth(k, r.depth);
        std::vector<EllipseSpec> shared;
        for (const auto& e : ellipsoids) {
            EllipseSpec s;
            if (e.profile.visibility == Visibility::Both && e.section(z, s)) shared.push_back(s);
        }
        const auto mask_main = render_ellipses(r.volume_side, shared, Modality::Main);
        const auto mask_aux = render_ellipses(r.volume_side, shared, Modality::Aux);
        for (std::size_t i = 0; i < mask_main.size(); ++i) {
            CHECK((mask_main.values[i] > 0.0) == (mask_aux.values[i] > 0.0));
            if (mask_main.values[i] > 0.0) {
                CHECK(v.main[k].values[i] > 0.0);
                CHECK(v.aux[k].values[i] > 0.0);
            }
        }
    }
}

TEST_CASE("default recipe: modalities correlated but not identical") {
    auto r = small_recipe();
    r.depth = 32;
    int bad = 0, total = 0;
    for (std::uint64_t s = 0; s < 10; ++s) {
        const auto v = generate_paired_volume(r, 100 + s);
        for (int k = 0; k < v.main.depth(); ++k) {
            const double q = metrics::ssim(v.aux[k], v.main[k]);
            bad += !(q > 0.2 && q < 0.98);
            ++total;
        }
        CHECK(gate_violations(r, v) == 0);
    }
    CHECK(bad == 0);
}

TEST_CASE("the gate redraws deterministically and can be disabled") {
    auto r = small_recipe();
    r.depth = 32;
    auto ungated = r;
    ungated.gate_attempts = 0;
    int redrawn = 0;
    for (std::uint64_t s = 0; s < 10; ++s) {
        const auto raw = generate_paired_volume(ungated, s);
        CHECK(raw.main[0].values == render_paired_volume(r, sample_ellipsoids(r, s)).main[0].values);
        const auto gated = generate_paired_volume(r, s);
        CHECK(gated.main[5].values == generate_paired_volume(r, s).main[5].values);
        if (gate_violations(r, raw) > 0) {
            ++redrawn;
            CHECK(gated.main[0].values != raw.main[0].values);
        } else {
            CHECK(gated.main[0].values == raw.main[0].values);
        }
    }
    CHECK(redrawn < 10);
}

TEST_CASE("recipe validation") {
    auto r = small_recipe();
    r.ellipse_count_min = 5;
    r.ellipse_count_max = 2;
    CHECK_THROWS_AS(r.validate(), ConfigError);
    r = small_recipe();
    r.attenuation_main = {0.2, 1.5};
    CHECK_THROWS_AS(r.validate(), ConfigError);
    r = small_recipe();
    r.main_only_fraction = 0.9;
    CHECK_THROWS_AS(r.validate(), ConfigError);
    r = small_recipe();
    r.volume_side = 0;
    CHECK_THROWS_AS(r.validate(), ConfigError);
    r = small_recipe();
    r.gate_ssim = {0.9, 0.5};
    CHECK_THROWS_AS(r.validate(), ConfigError);
}
