#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "xmct/degrade.hpp"
#include "xmct/diffusion.hpp"
#include "xmct/phantoms.hpp"
#include "xmct/solver.hpp"

namespace xmct::harness {

enum class Mode { Unimodal, Crossmodal };
const char* mode_name(Mode m);

/// Network and optimizer settings of one trainable model.
struct ModelTraining {
    int base_channels = 8;
    int time_embed_dim = 16;  // prior only
    int epochs = 1;
    int batch = 8;
    diffusion::OptimizerSpec optimizer;
    double adversarial_weight = 0.0;  // translator only
    int discriminator_channels = 8;   // translator only
};

/// Everything one experiment needs. Loaded from an INI file; see configs/desk.ini for every
/// key with its default.
struct ExperimentConfig {
    // [experiment]
    std::uint64_t seed = 0;
    std::filesystem::path out_dir = "out";
    int workers = 1;
    int train_volumes = 10;
    int test_volumes = 3;

    // [phantom]
    phantoms::PhantomRecipe recipe;
    int prior_slices = 1000;

    // [geometry]
    double pixel_pitch = 1.0;

    // [degrade]: ideal reference plus the cartesian spec grid for the paired set
    int ideal_views = 256;
    std::vector<int> main_views{8, 16, 32, 64, 128, 256};
    std::vector<double> main_noise{0.0, 0.05};
    std::vector<double> main_blur{0.0, 1.0, 2.0};
    std::vector<double> main_keep{0.7, 1.0};
    std::vector<int> aux_views{64};
    std::vector<double> aux_noise{0.05};
    std::vector<double> aux_blur{1.0};
    std::vector<double> aux_keep{1.0};
    int paired_count = 400;
    double validation_fraction = 0.2;

    // [schedule]
    int schedule_T = 1000;
    double beta_start = 1e-4;
    double beta_end = 0.02;

    // [prior], [xmodal]
    ModelTraining prior;
    ModelTraining xmodal;

    // [solver]; num_adapt_steps, crossmodal_enabled and seed are set per sweep cell
    solver::SolverConfig solver;

    // [sweep]
    std::vector<int> sweep_views{8, 16, 32, 64, 128, 256};
    std::vector<int> sweep_steps{5, 10};
    std::vector<double> sweep_noise{0.0, 0.05};
    std::vector<Mode> sweep_modes{Mode::Unimodal, Mode::Crossmodal};
    degrade::DegradationSpec aux_spec{64, 0.05, 1.0, 1.0, 0};
    int dump_slice = -1;  // -1: middle slice

    /// Cross-field checks; throws ConfigError naming the offending key.
    void validate() const;
    degrade::DegradationSpec ideal_spec() const;
    std::vector<std::pair<degrade::DegradationSpec, degrade::DegradationSpec>> spec_grid() const;
    nn::UNetSpec prior_arch() const;
    diffusion::NoiseSchedule schedule() const;
};

/// Parses INI text. Unknown sections or keys and malformed values throw ConfigError with
/// "<source>: [section] key: reason".
ExperimentConfig parse_config(std::istream& is, const std::string& source = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical INI rendering; parse_config(to_ini(c)) reproduces c.
std::string to_ini(const ExperimentConfig& config);

}  // namespace xmct::harness
