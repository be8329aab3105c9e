#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "xmct/grid.hpp"
#include "xmct/nn/unet.hpp"

namespace xmct::diffusion {

/// Linear-beta DDPM schedule. Index t runs over [1, T]; t = 0 is the clean boundary
/// with alpha_bar = 1.
struct NoiseSchedule {
    int T = 0;
    double beta_start = 0.0;
    double beta_end = 0.0;
    std::vector<double> beta;       // beta[t], t in [1, T]; beta[0] unused (0)
    std::vector<double> alpha;      // 1 - beta
    std::vector<double> alpha_bar;  // alpha_bar[0] = 1

    double alpha_bar_at(int t) const;
};

NoiseSchedule make_schedule(int T, double beta_start = 1e-4, double beta_end = 0.02);

/// sqrt(ab[t]) x0 + sqrt(1 - ab[t]) eps
GridImage noising_sample(const GridImage& x0, int t, const GridImage& eps, const NoiseSchedule& sched);

/// Trainable noise predictor eps_theta: architecture plus flat single-precision weights.
struct DenoiserParams {
    nn::UNetSpec arch;
    std::vector<float> theta;

    void validate() const;
};

DenoiserParams init_denoiser(const nn::UNetSpec& arch, std::uint64_t seed);

/// eps_theta(xt, t)
GridImage predict_noise(const DenoiserParams& params, const GridImage& xt, int t);

/// (xt - sqrt(1 - ab[t]) eps_hat) / sqrt(ab[t])
GridImage tweedie_from_noise(const GridImage& xt, int t, const GridImage& eps_hat, const NoiseSchedule& sched);
GridImage tweedie_estimate(const GridImage& xt, int t, const DenoiserParams& params, const NoiseSchedule& sched);

/// noising_sample with a fresh Gaussian draw from `seed`; t_next = 0 returns x0_est.
GridImage renoise(const GridImage& x0_est, int t_next, std::uint64_t seed, const NoiseSchedule& sched);

GridImage standard_normal_image(int side, std::uint64_t seed);

enum class OptimizerKind { Sgd = 0, Adam = 1 };

struct OptimizerSpec {
    OptimizerKind kind = OptimizerKind::Sgd;
    double lr = 1e-3;
    double momentum = 0.0;       // SGD momentum (0: plain SGD), or Adam beta1
    double beta2 = 0.999;        // Adam only
    double max_grad_norm = 0.0;  // 0: no clipping

    void validate() const;
};

struct TrainConfig {
    int epochs = 1;
    int batch = 8;
    OptimizerSpec optimizer;
    std::uint64_t seed = 0;
    std::int64_t start_step = 0;  // resume point (global step count already taken)
};

struct TrainResult {
    DenoiserParams params;
    std::vector<float> optimizer_state;  // see optimizer_step
    std::vector<double> step_losses;   // one per step taken in this call
    std::vector<double> epoch_losses;  // mean step loss per epoch
    std::int64_t steps_taken = 0;      // global step count after training
};

class TrainingError : public std::runtime_error {
public:
    TrainingError(const std::string& what, DenoiserParams last_finite, std::int64_t step)
        : std::runtime_error(what), last_finite_(std::move(last_finite)), step_(step) {}
    const DenoiserParams& last_finite() const { return last_finite_; }
    std::int64_t step() const { return step_; }

private:
    DenoiserParams last_finite_;
    std::int64_t step_;
};

/// Denoising score matching: minimizes mean (eps - eps_theta(noising_sample(x0, t, eps), t))^2
/// with t ~ U{1..T}, eps ~ N(0, I). Batches and noise are derived from
/// (seed, global step) so an interrupted run resumed from `start_step` continues identically.
/// `initial_state` resumes the optimizer.
TrainResult train_denoiser(const std::vector<GridImage>& dataset, const NoiseSchedule& sched, DenoiserParams init,
                           const TrainConfig& config, std::vector<float> initial_state = {});

/// Global step -> (epoch, position) bookkeeping shared with the translator trainer.
int steps_per_epoch(int dataset_size, int batch);
/// Dataset indices used at a global step: epoch permutation from (seed, epoch), then the slice.
std::vector<int> batch_indices(int dataset_size, int batch, std::uint64_t seed, std::int64_t global_step);

/// One update at 1-based global step `step` with optional global-norm clipping. `state`
/// holds the SGD momentum buffer, or the Adam first and second moments back to back; it is
/// sized on first use. Returns the pre-clip gradient norm.
double optimizer_step(std::vector<float>& theta, std::vector<float>& grad, std::vector<float>& state,
                      const OptimizerSpec& spec, std::int64_t step);

}  // namespace xmct::diffusion
