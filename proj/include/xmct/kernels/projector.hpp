#pragma once

// Pixel-driven parallel-beam projector kernels. Each pixel deposits its value onto the
// detector as a box of width max(|cos|, |sin|) * pixel/detector pitch, split over the bins it
// overlaps (with equal pitches and axis-aligned angles this is linear interpolation); the
// adjoint gathers with the identical weights, so <Ax, y> = <x, A^T y> holds by construction.
//
// Two implementations share one contract: `serial` is the plain reference used by tests and
// the benchmark, `omp` is the production path (angle-parallel forward, row-parallel adjoint).
// Neither variant's result depends on the OpenMP thread count.

#include <algorithm>
#include <cmath>
#include <span>

namespace xmct::kernels {

struct ProjectorLayout {
    int side = 0;               // image pixels per edge
    int bins = 0;               // detector bins
    double pixel_pitch = 1.0;
    double detector_pitch = 1.0;
    std::span<const double> angles;
};

/// Detector footprint of one pixel at angle theta, in bins.
inline double footprint_width(const ProjectorLayout& l, double theta) {
    return std::max(std::abs(std::cos(theta)), std::abs(std::sin(theta))) * l.pixel_pitch / l.detector_pitch;
}

namespace serial {
void forward_project(const ProjectorLayout& layout, std::span<const double> image, std::span<double> sino);
void back_project(const ProjectorLayout& layout, std::span<const double> sino, std::span<double> image);
}  // namespace serial

namespace omp {
void forward_project(const ProjectorLayout& layout, std::span<const double> image, std::span<double> sino);
void back_project(const ProjectorLayout& layout, std::span<const double> sino, std::span<double> image);
}  // namespace omp

}  // namespace xmct::kernels
