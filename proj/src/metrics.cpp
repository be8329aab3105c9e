#include "xmct/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

namespace xmct::metrics {

double psnr(const GridImage& x, const GridImage& ref, double data_range) {
    require_same_shape(x, ref, "psnr");
    if (!(data_range > 0.0)) throw DomainError("psnr: data_range must be positive");
    double mse = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x.values[i] - ref.values[i];
        mse += d * d;
    }
    mse /= static_cast<double>(x.size());
    if (mse == 0.0) return kPsnrCap;
    return 10.0 * std::log10(data_range * data_range / mse);
}

namespace {

// Separable Gaussian filtering restricted to the valid region: output is
// (h - win + 1) x (w - win + 1).
std::vector<double> filter_valid(const std::vector<double>& img, int w, int h, const std::vector<double>& k) {
    const int win = static_cast<int>(k.size());
    const int ow = w - win + 1, oh = h - win + 1;
    std::vector<double> tmp(static_cast<std::size_t>(h) * ow);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < ow; ++c) {
            double s = 0.0;
            for (int j = 0; j < win; ++j) s += k[static_cast<std::size_t>(j)] * img[static_cast<std::size_t>(r) * w + c + j];
            tmp[static_cast<std::size_t>(r) * ow + c] = s;
        }
    std::vector<double> out(static_cast<std::size_t>(oh) * ow);
    for (int r = 0; r < oh; ++r)
        for (int c = 0; c < ow; ++c) {
            double s = 0.0;
            for (int j = 0; j < win; ++j) s += k[static_cast<std::size_t>(j)] * tmp[static_cast<std::size_t>(r + j) * ow + c];
            out[static_cast<std::size_t>(r) * ow + c] = s;
        }
    return out;
}

}  // namespace

double ssim(const GridImage& x, const GridImage& ref, double data_range, int window) {
    require_same_shape(x, ref, "ssim");
    if (window < 3 || window % 2 == 0) throw DomainError("ssim: window must be odd and >= 3");
    if (x.width < window || x.height < window) throw DimensionError("ssim: image smaller than window");
    if (!(data_range > 0.0)) throw DomainError("ssim: data_range must be positive");

    std::vector<double> k(static_cast<std::size_t>(window));
    const double sigma = 1.5;
    const int half = window / 2;
    for (int i = 0; i < window; ++i) k[static_cast<std::size_t>(i)] = std::exp(-0.5 * (i - half) * (i - half) / (sigma * sigma));
    const double ksum = std::accumulate(k.begin(), k.end(), 0.0);
    for (auto& v : k) v /= ksum;

    const int w = x.width, h = x.height;
    std::vector<double> xx(x.size()), yy(x.size()), xy(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        xx[i] = x.values[i] * x.values[i];
        yy[i] = ref.values[i] * ref.values[i];
        xy[i] = x.values[i] * ref.values[i];
    }
    const auto mx = filter_valid(x.values, w, h, k);
    const auto my = filter_valid(ref.values, w, h, k);
    const auto sxx = filter_valid(xx, w, h, k);
    const auto syy = filter_valid(yy, w, h, k);
    const auto sxy = filter_valid(xy, w, h, k);

    const double c1 = (0.01 * data_range) * (0.01 * data_range);
    const double c2 = (0.03 * data_range) * (0.03 * data_range);
    double total = 0.0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
        const double vx = sxx[i] - mx[i] * mx[i];
        const double vy = syy[i] - my[i] * my[i];
        const double cxy = sxy[i] - mx[i] * my[i];
        const double num = (2.0 * mx[i] * my[i] + c1) * (2.0 * cxy + c2);
        const double den = (mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2);
        total += num / den;
    }
    return total / static_cast<double>(mx.size());
}

double MetricReport::mean_psnr() const {
    if (slice_psnr.empty()) return 0.0;
    return std::accumulate(slice_psnr.begin(), slice_psnr.end(), 0.0) / static_cast<double>(slice_psnr.size());
}

double MetricReport::mean_ssim() const {
    if (slice_ssim.empty()) return 0.0;
    return std::accumulate(slice_ssim.begin(), slice_ssim.end(), 0.0) / static_cast<double>(slice_ssim.size());
}

MetricReport evaluate_volume(const GridVolume& recon, const GridVolume& reference, double data_range) {
    if (recon.depth() != reference.depth()) throw DimensionError("evaluate_volume: depth mismatch");
    MetricReport r;
    for (int s = 0; s < recon.depth(); ++s) {
        r.slice_psnr.push_back(psnr(recon[static_cast<std::size_t>(s)], reference[static_cast<std::size_t>(s)], data_range));
        r.slice_ssim.push_back(ssim(recon[static_cast<std::size_t>(s)], reference[static_cast<std::size_t>(s)], data_range));
    }
    return r;
}

void write_slice_rows(std::ostream& os, const MetricReport& r) {
    char buf[256];
    for (std::size_t s = 0; s < r.slice_psnr.size(); ++s) {
        std::snprintf(buf, sizeof buf, "%s,%d,%d,%.4f,%s,%zu,%.6f,%.6f\n", r.volume.c_str(), r.views, r.steps, r.noise,
                      r.mode.c_str(), s, r.slice_psnr[s], r.slice_ssim[s]);
        os << buf;
    }
}

}  // namespace xmct::metrics
