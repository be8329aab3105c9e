#include "xmct/tomo.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>
#include <string>

#include "xmct/kernels/projector.hpp"
#include "xmct/rng.hpp"

namespace xmct::tomo {

namespace {

kernels::ProjectorLayout layout_of(const ProjectionGeometry& g) {
    return {g.image_side, g.num_detector_bins, g.pixel_pitch, g.detector_pitch, g.angles};
}

// The FFTW planner is not re-entrant.
std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

int next_pow2(int n) {
    int p = 1;
    while (p < n) p <<= 1;
    return p;
}

// Frequency response of the band-limited ramp (spatial kernel sampled at the detector pitch,
// then transformed) times the optional Hann apodization. Length padded/2 + 1.
std::vector<double> ramp_response(int padded, double tau, FilterKind kind) {
    std::vector<double> h(static_cast<std::size_t>(padded), 0.0);
    h[0] = 1.0 / (4.0 * tau * tau);
    for (int k = 1; k <= padded / 2; ++k) {
        if (k % 2 == 0) continue;
        const double v = -1.0 / (std::numbers::pi * std::numbers::pi * k * k * tau * tau);
        h[static_cast<std::size_t>(k)] = v;
        h[static_cast<std::size_t>(padded - k)] = v;
    }
    const int nfreq = padded / 2 + 1;
    std::vector<std::complex<double>> spectrum(static_cast<std::size_t>(nfreq));
    {
        std::lock_guard lock(fftw_planner_mutex());
        fftw_plan plan = fftw_plan_dft_r2c_1d(padded, h.data(), reinterpret_cast<fftw_complex*>(spectrum.data()),
                                              FFTW_ESTIMATE);
        fftw_execute(plan);
        fftw_destroy_plan(plan);
    }
    std::vector<double> response(static_cast<std::size_t>(nfreq));
    for (int k = 0; k < nfreq; ++k) {
        double r = spectrum[static_cast<std::size_t>(k)].real();
        if (kind == FilterKind::Hann)
            r *= 0.5 * (1.0 + std::cos(std::numbers::pi * k / (nfreq - 1)));
        response[static_cast<std::size_t>(k)] = r;
    }
    return response;
}

}  // namespace

void ProjectionGeometry::validate() const {
    if (angles.empty()) throw ConfigError("geometry: num_angles must be positive");
    if (image_side <= 0) throw ConfigError("geometry: image_side must be positive");
    if (num_detector_bins <= 0) throw ConfigError("geometry: num_detector_bins must be positive");
    if (!(pixel_pitch > 0.0) || !(detector_pitch > 0.0)) throw ConfigError("geometry: pitches must be positive");
    for (std::size_t i = 0; i < angles.size(); ++i) {
        if (!(angles[i] >= 0.0 && angles[i] < std::numbers::pi))
            throw ConfigError("geometry: angle " + std::to_string(i) + " outside [0, pi)");
        if (i > 0 && !(angles[i] > angles[i - 1])) throw ConfigError("geometry: angles must be strictly increasing");
    }
    if (num_detector_bins < image_side) throw ConfigError("geometry: num_detector_bins must be >= image_side");
    if (num_detector_bins * detector_pitch < image_side * pixel_pitch)
        throw ConfigError("geometry: detector narrower than the image");
}

ProjectionGeometry make_parallel_geometry(int image_side, int num_views, double pixel_pitch) {
    if (num_views <= 0) throw ConfigError("geometry: num_views must be positive");
    ProjectionGeometry g;
    g.angles.resize(static_cast<std::size_t>(num_views));
    for (int i = 0; i < num_views; ++i) g.angles[static_cast<std::size_t>(i)] = std::numbers::pi * i / num_views;
    g.image_side = image_side;
    g.pixel_pitch = pixel_pitch;
    // half-pixel bins: at one bin per pixel, Hann FBP cannot resolve pixel-sharp edges
    g.detector_pitch = 0.5 * pixel_pitch;
    g.num_detector_bins = 2 * static_cast<int>(std::ceil(image_side * std::numbers::sqrt2)) + 1;
    g.validate();
    return g;
}

Sinogram::Sinogram(ProjectionGeometry g)
    : geometry(std::move(g)),
      values(static_cast<std::size_t>(geometry.num_angles()) * geometry.num_detector_bins, 0.0) {}

Sinogram forward_project(const GridImage& img, const ProjectionGeometry& geom) {
    geom.validate();
    if (img.width != geom.image_side || img.height != geom.image_side)
        throw DimensionError("forward_project: image is " + std::to_string(img.width) + "x" +
                             std::to_string(img.height) + ", geometry expects side " +
                             std::to_string(geom.image_side));
    if (!img.all_finite()) throw DomainError("forward_project: non-finite pixel value");
    Sinogram out(geom);
    kernels::omp::forward_project(layout_of(geom), img.values, out.values);
    return out;
}

GridImage back_project(const Sinogram& sino) {
    const auto& g = sino.geometry;
    g.validate();
    if (sino.values.size() != static_cast<std::size_t>(g.num_angles()) * g.num_detector_bins)
        throw DimensionError("back_project: sinogram does not match its geometry");
    GridImage out(g.image_side, g.image_side);
    kernels::omp::back_project(layout_of(g), sino.values, out.values);
    return out;
}

GridImage fbp_reconstruct(const Sinogram& sino, FilterKind filter) {
    const auto& g = sino.geometry;
    if (g.num_angles() < 2) throw ConfigError("fbp_reconstruct: at least 2 angles required");
    g.validate();
    if (sino.values.size() != static_cast<std::size_t>(g.num_angles()) * g.num_detector_bins)
        throw DimensionError("fbp_reconstruct: sinogram does not match its geometry");

    const int bins = g.num_detector_bins;
    const int padded = next_pow2(2 * bins);
    const int nfreq = padded / 2 + 1;
    const int n_angles = g.num_angles();
    const auto response = ramp_response(padded, g.detector_pitch, filter);

    std::vector<double> rows(static_cast<std::size_t>(n_angles) * padded, 0.0);
    std::vector<std::complex<double>> spec(static_cast<std::size_t>(n_angles) * nfreq);
    for (int a = 0; a < n_angles; ++a)
        std::copy_n(sino.values.begin() + static_cast<std::ptrdiff_t>(a) * bins, bins,
                    rows.begin() + static_cast<std::ptrdiff_t>(a) * padded);

    fftw_plan fwd, inv;
    {
        std::lock_guard lock(fftw_planner_mutex());
        fwd = fftw_plan_many_dft_r2c(1, &padded, n_angles, rows.data(), nullptr, 1, padded,
                                     reinterpret_cast<fftw_complex*>(spec.data()), nullptr, 1, nfreq, FFTW_ESTIMATE);
        inv = fftw_plan_many_dft_c2r(1, &padded, n_angles, reinterpret_cast<fftw_complex*>(spec.data()), nullptr, 1,
                                     nfreq, rows.data(), nullptr, 1, padded, FFTW_ESTIMATE);
    }
    fftw_execute(fwd);
    // tau from the convolution sum, 1/padded from the unnormalized inverse transform
    const double scale = g.detector_pitch / padded;
    for (int a = 0; a < n_angles; ++a)
        for (int k = 0; k < nfreq; ++k)
            spec[static_cast<std::size_t>(a) * nfreq + k] *= response[static_cast<std::size_t>(k)] * scale;
    fftw_execute(inv);
    {
        std::lock_guard lock(fftw_planner_mutex());
        fftw_destroy_plan(fwd);
        fftw_destroy_plan(inv);
    }

    Sinogram filtered(g);
    for (int a = 0; a < n_angles; ++a)
        std::copy_n(rows.begin() + static_cast<std::ptrdiff_t>(a) * padded, bins,
                    filtered.values.begin() + static_cast<std::ptrdiff_t>(a) * bins);

    GridImage img = back_project(filtered);
    // back_project carries pixel_pitch^2/detector_pitch per sample; FBP wants pi/N.
    const double norm = std::numbers::pi / n_angles * g.detector_pitch / (g.pixel_pitch * g.pixel_pitch);
    for (auto& v : img.values) v *= norm;
    return img;
}

Sinogram add_noise(const Sinogram& sino, double relative_sigma, std::uint64_t seed) {
    if (!(relative_sigma >= 0.0)) throw DomainError("add_noise: relative_sigma must be >= 0");
    Sinogram out = sino;
    if (relative_sigma == 0.0 || sino.values.empty()) return out;
    double mean_abs = 0.0;
    for (double v : sino.values) mean_abs += std::abs(v);
    mean_abs /= static_cast<double>(sino.values.size());
    const double sigma = relative_sigma * mean_abs;
    Rng rng(seed);
    for (auto& v : out.values) v += sigma * rng.normal();
    return out;
}

double operator_norm_sq(const ProjectionGeometry& geom, int iterations) {
    GridImage x(geom.image_side, geom.image_side, 1.0);
    double lambda = 0.0;
    for (int it = 0; it < iterations; ++it) {
        const double n = norm2(x.values);
        if (n == 0.0) return 0.0;
        for (auto& v : x.values) v /= n;
        GridImage y = back_project(forward_project(x, geom));
        lambda = dot(x.values, y.values);
        x = std::move(y);
    }
    return lambda;
}

}  // namespace xmct::tomo
