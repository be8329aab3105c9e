#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "xmct/errors.hpp"

namespace xmct {

/// A 2D slice of linear attenuation values, row-major. Operator math is double precision.
struct GridImage {
    int width = 0;
    int height = 0;
    std::vector<double> values;

    GridImage() = default;
    GridImage(int w, int h, double fill = 0.0)
        : width(w), height(h), values(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {}

    double& at(int row, int col) { return values[static_cast<std::size_t>(row) * width + col]; }
    double at(int row, int col) const { return values[static_cast<std::size_t>(row) * width + col]; }
    std::size_t size() const { return values.size(); }
    bool same_shape(const GridImage& o) const { return width == o.width && height == o.height; }
    bool all_finite() const;
};

/// A stack of equally sized slices.
struct GridVolume {
    std::vector<GridImage> slices;

    GridVolume() = default;
    GridVolume(int depth, int side) : slices(static_cast<std::size_t>(depth), GridImage(side, side)) {}
    explicit GridVolume(std::vector<GridImage> s);

    int depth() const { return static_cast<int>(slices.size()); }
    int width() const { return slices.empty() ? 0 : slices.front().width; }
    int height() const { return slices.empty() ? 0 : slices.front().height; }
    GridImage& operator[](std::size_t i) { return slices[i]; }
    const GridImage& operator[](std::size_t i) const { return slices[i]; }
};

void require_same_shape(const GridImage& a, const GridImage& b, const char* what);

// Small elementwise helpers used across modules.
double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
void clip_inplace(GridImage& img, double lo, double hi);

}  // namespace xmct
