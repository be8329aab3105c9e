#include <algorithm>
#include <cmath>
#include <vector>

#include "xmct/kernels/projector.hpp"

namespace xmct::kernels::serial {

namespace {

struct Deposit {
    int bin;
    double weight;
};

// Bins covered by the footprint box of pixel (row, col) at angle theta, with the fraction of
// the box falling into each.
std::vector<Deposit> locate(const ProjectorLayout& l, int row, int col, double theta) {
    const double half = 0.5 * (l.side - 1);
    const double x = (col - half) * l.pixel_pitch;
    const double y = (half - row) * l.pixel_pitch;
    const double s = x * std::cos(theta) + y * std::sin(theta);
    const double u = s / l.detector_pitch + 0.5 * (l.bins - 1);
    const double width = footprint_width(l, theta);
    const double lo = u - 0.5 * width, hi = u + 0.5 * width;
    std::vector<Deposit> out;
    for (double b = std::floor(lo + 0.5); b - 0.5 < hi; b += 1.0) {
        const double overlap = std::min(hi, b + 0.5) - std::max(lo, b - 0.5);
        if (overlap > 0.0) out.push_back({static_cast<int>(b), overlap / width});
    }
    return out;
}

}  // namespace

void forward_project(const ProjectorLayout& l, std::span<const double> image, std::span<double> sino) {
    const double w = l.pixel_pitch * l.pixel_pitch / l.detector_pitch;
    for (auto& v : sino) v = 0.0;
    for (std::size_t a = 0; a < l.angles.size(); ++a) {
        double* row_out = sino.data() + a * l.bins;
        for (int r = 0; r < l.side; ++r) {
            for (int c = 0; c < l.side; ++c) {
                const double v = image[static_cast<std::size_t>(r) * l.side + c];
                if (v == 0.0) continue;
                for (const auto& d : locate(l, r, c, l.angles[a]))
                    if (d.bin >= 0 && d.bin < l.bins) row_out[d.bin] += w * d.weight * v;
            }
        }
    }
}

void back_project(const ProjectorLayout& l, std::span<const double> sino, std::span<double> image) {
    const double w = l.pixel_pitch * l.pixel_pitch / l.detector_pitch;
    for (int r = 0; r < l.side; ++r) {
        for (int c = 0; c < l.side; ++c) {
            double acc = 0.0;
            for (std::size_t a = 0; a < l.angles.size(); ++a) {
                const double* row_in = sino.data() + a * l.bins;
                for (const auto& d : locate(l, r, c, l.angles[a]))
                    if (d.bin >= 0 && d.bin < l.bins) acc += w * d.weight * row_in[d.bin];
            }
            image[static_cast<std::size_t>(r) * l.side + c] = acc;
        }
    }
}

}  // namespace xmct::kernels::serial
