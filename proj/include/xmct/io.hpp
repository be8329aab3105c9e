#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "xmct/diffusion.hpp"
#include "xmct/grid.hpp"
#include "xmct/solver.hpp"
#include "xmct/tomo.hpp"
#include "xmct/xmodal.hpp"

namespace xmct::io {

// Binary grid file:
//   "XMGR" | u16 version (1) | u32 width | u32 height | u32 depth | u16 dtype | payload
// dtype 1 = float32, 2 = float64; payload little-endian, row-major within a slice,
// slices consecutive.
enum class DType : std::uint16_t { F32 = 1, F64 = 2 };

void write_grid(const std::filesystem::path& path, const GridVolume& vol, DType dtype = DType::F64);
void write_grid(std::ostream& os, const GridVolume& vol, DType dtype = DType::F64);
GridVolume read_grid(const std::filesystem::path& path);
GridVolume read_grid(std::istream& is);

/// Sinograms travel as 1-slice grids of width = bins, height = angles.
void write_sinogram(const std::filesystem::path& path, const tomo::Sinogram& sino);
tomo::Sinogram read_sinogram(const std::filesystem::path& path, const tomo::ProjectionGeometry& geometry);

// Checkpoint container:
//   magic (4) | u16 version (1) | u32 in_channels | u32 base_channels | u32 time_embed_dim |
//   u32 image_side | u32 head | <model section> | i64 trained_steps | u64 param_count |
//   u64 state_count | f32 params[param_count] | f32 optimizer_state[state_count]
// model section, diffusion ("XMDF"): u32 T | f64 beta_start | f64 beta_end
// model section, translator ("XMTR"): u32 channel_order (0 = estimate, aux) |
//   f64 adversarial_weight | u32 epochs | u32 batch | u32 optimizer kind | f64 lr |
//   f64 momentum | f64 beta2 | f64 max_grad_norm | u64 seed
inline constexpr char kDiffusionMagic[4] = {'X', 'M', 'D', 'F'};
inline constexpr char kTranslatorMagic[4] = {'X', 'M', 'T', 'R'};

struct DenoiserCheckpoint {
    diffusion::DenoiserParams params;
    diffusion::NoiseSchedule schedule;
    std::int64_t trained_steps = 0;
    std::vector<float> optimizer_state;
};

void write_denoiser(const std::filesystem::path& path, const DenoiserCheckpoint& ckpt);
DenoiserCheckpoint read_denoiser(const std::filesystem::path& path);

struct TranslatorCheckpoint {
    xmodal::TranslationModel model;
    std::vector<float> optimizer_state;
};

void write_translator(const std::filesystem::path& path, const TranslatorCheckpoint& ckpt);
TranslatorCheckpoint read_translator(const std::filesystem::path& path);

/// 8-bit binary PGM with fixed window [lo, hi].
void write_pgm(const std::filesystem::path& path, const GridImage& img, double lo = 0.0, double hi = 1.0);

/// Trace text format, one record per solver step:
///   t=<t> tau=<tau> refined=<0|1> residual=<%.9g> psnr=<%.6f> losses=<l1;l2;...>
void write_trace(std::ostream& os, const std::vector<solver::StepRecord>& trace);
std::vector<solver::StepRecord> read_trace(std::istream& is);

/// Writes `content` to `path` via a temporary sibling and rename.
void write_text_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace xmct::io
