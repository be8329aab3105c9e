#include "xmct/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace xmct {

bool GridImage::all_finite() const {
    return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

GridVolume::GridVolume(std::vector<GridImage> s) : slices(std::move(s)) {
    if (slices.empty()) throw DimensionError("GridVolume: depth must be >= 1");
    for (const auto& sl : slices) require_same_shape(sl, slices.front(), "GridVolume");
}

void require_same_shape(const GridImage& a, const GridImage& b, const char* what) {
    if (!a.same_shape(b))
        throw DimensionError(std::string(what) + ": shape mismatch (" + std::to_string(a.width) + "x" +
                             std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" +
                             std::to_string(b.height) + ")");
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

void clip_inplace(GridImage& img, double lo, double hi) {
    for (auto& v : img.values) v = std::clamp(v, lo, hi);
}

}  // namespace xmct
