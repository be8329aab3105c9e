#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "xmct/grid.hpp"

namespace xmct::metrics {

/// Value returned by psnr() when the images are identical.
inline constexpr double kPsnrCap = 99.0;

double psnr(const GridImage& x, const GridImage& ref, double data_range = 1.0);

/// Mean SSIM over all fully-contained Gaussian windows (sigma 1.5),
/// C1 = (0.01 L)^2, C2 = (0.03 L)^2.
double ssim(const GridImage& x, const GridImage& ref, double data_range = 1.0, int window = 7);

struct MetricReport {
    // experiment identifiers
    std::string volume;
    int views = 0;
    int steps = 0;
    double noise = 0.0;
    std::string mode;

    std::vector<double> slice_psnr;
    std::vector<double> slice_ssim;

    double mean_psnr() const;
    double mean_ssim() const;
};

/// Per-slice metrics of a reconstructed volume against its reference.
MetricReport evaluate_volume(const GridVolume& recon, const GridVolume& reference, double data_range = 1.0);

/// Column order of the per-slice CSV: volume,views,steps,noise,mode,slice,psnr,ssim
inline constexpr const char* kSliceCsvHeader = "volume,views,steps,noise,mode,slice,psnr,ssim";
void write_slice_rows(std::ostream& os, const MetricReport& report);

}  // namespace xmct::metrics
