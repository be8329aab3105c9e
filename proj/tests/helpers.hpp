#pragma once

#include <cmath>
#include <vector>

#include "xmct/grid.hpp"
#include "xmct/phantoms.hpp"
#include "xmct/rng.hpp"

namespace testing {

inline xmct::GridImage random_image(int w, int h, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
    xmct::GridImage img(w, h);
    xmct::Rng rng(seed);
    for (auto& v : img.values) v = rng.uniform(lo, hi);
    return img;
}

inline xmct::GridImage disk(int side, double radius_px, double value) {
    xmct::GridImage img(side, side);
    const double c = (side - 1) / 2.0;
    for (int r = 0; r < side; ++r)
        for (int col = 0; col < side; ++col)
            if (std::hypot(r - c, col - c) <= radius_px) img.at(r, col) = value;
    return img;
}

/// A fixed 64x64 ellipse phantom (values in [0, 1]).
inline xmct::GridImage ellipse_phantom(int side = 64) {
    using xmct::phantoms::EllipseSpec;
    std::vector<EllipseSpec> e(4);
    e[0] = {0.0, 0.0, 0.72, 0.85, 0.0, 0.4, 0.4};
    e[1] = {0.25, 0.2, 0.2, 0.32, 0.4, 0.3, 0.3};
    e[2] = {-0.3, -0.25, 0.25, 0.14, -0.6, 0.25, 0.25};
    e[3] = {0.05, -0.5, 0.1, 0.1, 0.0, 0.2, 0.2};
    return xmct::phantoms::render_ellipses(side, e, xmct::phantoms::Modality::Main);
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace testing
