#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "xmct/diffusion.hpp"
#include "xmct/grid.hpp"
#include "xmct/tomo.hpp"
#include "xmct/xmodal.hpp"

namespace xmct::solver {

struct SolverConfig {
    int T_prime = 10;            // reverse steps
    int num_adapt_steps = 10;    // weight-adaptation iterations per reverse step
    double adapt_lr = 1e-6;      // gamma
    int minibatch_K = 2;         // slices per adaptation iteration
    bool crossmodal_enabled = false;
    int crossmodal_period = 2;
    int crossmodal_min_t = 2;
    int inner_dc_steps = 5;      // image-space data-consistency steps inside the prediction
    double dc_step_scale = 1.8;  // step = scale / ||A^T A||; descent needs < 2
    int t_start = 0;             // schedule index that t = T_prime maps to; 0 means sched.T
    std::uint64_t seed = 0;

    void validate() const;
};

/// Measurements and fixed operators of one reconstruction problem.
struct Problem {
    std::vector<tomo::Sinogram> y_main;  // one sinogram per slice
    tomo::ProjectionGeometry geometry;
    diffusion::NoiseSchedule schedule;
    const GridVolume* ground_truth = nullptr;  // optional, for trace PSNR

    int depth() const { return static_cast<int>(y_main.size()); }
};

struct StepRecord {
    int t = 0;    // algorithm counter, T_prime .. 1
    int tau = 0;  // schedule index
    std::vector<double> adapt_losses;
    bool refined = false;
    double residual = 0.0;  // sum of squared sinogram residuals of the prediction
    double psnr = 0.0;      // mean slice PSNR of the prediction (0 without ground truth)
};

struct SolverState {
    int t = 0;
    GridVolume latent;
    diffusion::DenoiserParams theta;
    std::vector<StepRecord> trace;
};

/// (estimate, aux) -> refined estimate
using CrossModalFn = std::function<GridImage(const GridImage& estimate, const GridImage& aux)>;

class AdaptationError : public std::runtime_error {
public:
    AdaptationError(const std::string& what, int step, diffusion::DenoiserParams last_finite)
        : std::runtime_error(what), step_(step), last_finite_(std::move(last_finite)) {}
    int step() const { return step_; }
    const diffusion::DenoiserParams& last_finite() const { return last_finite_; }

private:
    int step_;
    diffusion::DenoiserParams last_finite_;
};

/// Schedule index for algorithm counter t (uniform stride; tau(0) = 0).
int map_timestep(int t, const SolverConfig& config, const diffusion::NoiseSchedule& sched);

/// Whether the cross-modal refinement fires at counter t.
bool refinement_fires(int t, const SolverConfig& config);

/// Step size of the image-space data-consistency iterations.
double dc_step_size(const tomo::ProjectionGeometry& geom, const SolverConfig& config);

/// sqrt(ab) * FBP(y) + sqrt(1 - ab) * eps per slice, at schedule index tau.
GridVolume init_latent(const std::vector<tomo::Sinogram>& y_main, const diffusion::NoiseSchedule& sched, int tau,
                       std::uint64_t seed);

/// Projected image-space refinement: x <- clip(x - step * A^T (A x - y), 0, 1), `steps` times.
GridImage dc_refine(const GridImage& x, const tomo::Sinogram& y, double step, int steps);

/// Clipped Tweedie estimate followed by `inner_dc_steps` data-consistency steps, clipped to [0, 1].
GridImage diff_solver_predict_slice(const GridImage& xt, int tau, const diffusion::DenoiserParams& theta,
                                    const tomo::Sinogram& y, const diffusion::NoiseSchedule& sched, double dc_step,
                                    int inner_dc_steps);
GridVolume diff_solver_predict(const GridVolume& xt, int tau, const diffusion::DenoiserParams& theta,
                               const Problem& problem, const SolverConfig& config);

/// Batch-normalized data-consistency loss (1/K) sum_k ||y_k - A DiffSolver(x_k)||^2.
double data_consistency_loss(const std::vector<GridImage>& x, const std::vector<tomo::Sinogram>& y,
                             const diffusion::DenoiserParams& theta, int tau, const diffusion::NoiseSchedule& sched,
                             double dc_step, int inner_dc_steps);

/// Same loss and its gradient w.r.t. theta. The gradient flows through the single denoiser
/// application; the (affine) data-consistency steps contribute their exact Jacobian and
/// the clips are passed straight through.
double data_consistency_loss_grad(const std::vector<GridImage>& x, const std::vector<tomo::Sinogram>& y,
                                  const diffusion::DenoiserParams& theta, int tau,
                                  const diffusion::NoiseSchedule& sched, double dc_step, int inner_dc_steps,
                                  std::vector<float>& grad);

/// num_adapt_steps SGD steps on the data-consistency loss with K-slice minibatches drawn
/// without replacement from mix_seed(seed, t, i). Appends losses to the last trace record.
diffusion::DenoiserParams adapt_weights(SolverState& state, const Problem& problem, const SolverConfig& config);

/// The full reverse loop: adapt -> predict -> (refine on cadence) -> renoise.
GridVolume reconstruct(const Problem& problem, const GridVolume* aux, const diffusion::DenoiserParams& theta0,
                       const SolverConfig& config, const CrossModalFn& crossmodal, SolverState* state_out = nullptr);

/// Convenience overload driving the refinement with a trained translation model.
GridVolume reconstruct(const Problem& problem, const GridVolume* aux, const diffusion::DenoiserParams& theta0,
                       const SolverConfig& config, const xmodal::TranslationModel* model,
                       SolverState* state_out = nullptr);

}  // namespace xmct::solver
