#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "xmct/degrade.hpp"
#include "xmct/diffusion.hpp"
#include "xmct/grid.hpp"
#include "xmct/nn/unet.hpp"

namespace xmct::xmodal {

struct TranslationTrainConfig {
    int epochs = 1;
    int batch = 4;
    diffusion::OptimizerSpec optimizer;
    double adversarial_weight = 0.0;  // > 0 adds a PatchGAN-style conditional adversarial term
    int discriminator_channels = 8;
    std::uint64_t seed = 0;
    std::int64_t start_step = 0;
};

/// Maps (current main-modality estimate, degraded auxiliary image) to the ideal main image.
/// Input channel order is fixed: 0 = estimate, 1 = aux. Inputs are clamped to [0, 1]; the
/// output head is sigmoid-bounded.
struct TranslationModel {
    nn::UNetSpec arch;
    std::vector<float> theta;
    TranslationTrainConfig trained_with;
    std::int64_t trained_steps = 0;

    int resolution() const { return static_cast<int>(arch.image_side); }
    void validate() const;
};

TranslationModel init_translation(int image_side, int base_channels, std::uint64_t seed);

struct TranslationTrainResult {
    TranslationModel model;
    std::vector<float> optimizer_state;
    std::vector<double> step_losses;  // mean absolute error per step
    std::vector<double> epoch_losses;
    std::vector<double> discriminator_losses;  // empty unless adversarial_weight > 0
};

class TranslationTrainingError : public std::runtime_error {
public:
    TranslationTrainingError(const std::string& what, TranslationModel last_finite)
        : std::runtime_error(what), last_finite_(std::move(last_finite)) {}
    const TranslationModel& last_finite() const { return last_finite_; }

private:
    TranslationModel last_finite_;
};

/// Pixelwise L1 regression onto ideal_main (plus the optional adversarial term). Batches follow
/// the same (seed, global step) rule as the prior, so `start_step` with `initial_state` resumes.
TranslationTrainResult train_translation(const std::vector<degrade::PairedSample>& dataset, TranslationModel init,
                                         const TranslationTrainConfig& config, std::vector<float> initial_state = {});

GridImage apply_translation(const TranslationModel& model, const GridImage& estimate, const GridImage& aux);

}  // namespace xmct::xmodal
