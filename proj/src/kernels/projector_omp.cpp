#include <algorithm>
#include <cmath>
#include <vector>

#include "xmct/kernels/projector.hpp"

namespace xmct::kernels::omp {

namespace {

// Per-angle affine map from (row, col) to detector coordinate: u = base + col*dcol - row*drow.
struct AngleMap {
    double base, dcol, drow, width;
};

std::vector<AngleMap> angle_maps(const ProjectorLayout& l) {
    std::vector<AngleMap> maps(l.angles.size());
    const double half = 0.5 * (l.side - 1);
    for (std::size_t a = 0; a < l.angles.size(); ++a) {
        const double c = std::cos(l.angles[a]) * l.pixel_pitch / l.detector_pitch;
        const double s = std::sin(l.angles[a]) * l.pixel_pitch / l.detector_pitch;
        maps[a] = {0.5 * (l.bins - 1) - half * c + half * s, c, s, footprint_width(l, l.angles[a])};
    }
    return maps;
}

}  // namespace

void forward_project(const ProjectorLayout& l, std::span<const double> image, std::span<double> sino) {
    const double w = l.pixel_pitch * l.pixel_pitch / l.detector_pitch;
    const auto maps = angle_maps(l);
    const int n_angles = static_cast<int>(l.angles.size());
#pragma omp parallel for schedule(static)
    for (int a = 0; a < n_angles; ++a) {
        double* out = sino.data() + static_cast<std::size_t>(a) * l.bins;
        for (int b = 0; b < l.bins; ++b) out[b] = 0.0;
        const AngleMap m = maps[static_cast<std::size_t>(a)];
        for (int r = 0; r < l.side; ++r) {
            const double row_base = m.base - r * m.drow;
            const double* in = image.data() + static_cast<std::size_t>(r) * l.side;
            for (int c = 0; c < l.side; ++c) {
                const double v = in[c];
                if (v == 0.0) continue;
                const double lo = row_base + c * m.dcol - 0.5 * m.width, hi = lo + m.width;
                const double wv = w * v / m.width;
                for (double b = std::floor(lo + 0.5); b - 0.5 < hi; b += 1.0) {
                    const double overlap = std::min(hi, b + 0.5) - std::max(lo, b - 0.5);
                    const int bi = static_cast<int>(b);
                    if (overlap > 0.0 && bi >= 0 && bi < l.bins) out[bi] += wv * overlap;
                }
            }
        }
    }
}

void back_project(const ProjectorLayout& l, std::span<const double> sino, std::span<double> image) {
    const double w = l.pixel_pitch * l.pixel_pitch / l.detector_pitch;
    const auto maps = angle_maps(l);
    const std::size_t n_angles = l.angles.size();
#pragma omp parallel for schedule(static)
    for (int r = 0; r < l.side; ++r) {
        double* out = image.data() + static_cast<std::size_t>(r) * l.side;
        for (int c = 0; c < l.side; ++c) {
            double acc = 0.0;
            for (std::size_t a = 0; a < n_angles; ++a) {
                const AngleMap& m = maps[a];
                const double* in = sino.data() + a * l.bins;
                const double lo = (m.base - r * m.drow) + c * m.dcol - 0.5 * m.width, hi = lo + m.width;
                double gathered = 0.0;
                for (double b = std::floor(lo + 0.5); b - 0.5 < hi; b += 1.0) {
                    const double overlap = std::min(hi, b + 0.5) - std::max(lo, b - 0.5);
                    const int bi = static_cast<int>(b);
                    if (overlap > 0.0 && bi >= 0 && bi < l.bins) gathered += overlap * in[bi];
                }
                acc += w / m.width * gathered;
            }
            out[c] = acc;
        }
    }
}

}  // namespace xmct::kernels::omp
