#include "xmct/solver.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "xmct/metrics.hpp"
#include "xmct/rng.hpp"

namespace xmct::solver {

namespace {

enum Stream : std::uint64_t { kInit = 1, kMinibatch = 2, kRenoise = 3 };

double residual_sq(const GridImage& x, const tomo::Sinogram& y) {
    const auto ax = tomo::forward_project(x, y.geometry);
    double s = 0.0;
    for (std::size_t i = 0; i < ax.values.size(); ++i) {
        const double d = ax.values[i] - y.values[i];
        s += d * d;
    }
    return s;
}

}  // namespace

void SolverConfig::validate() const {
    if (T_prime < 1) throw ConfigError("solver: T_prime must be >= 1");
    if (num_adapt_steps < 0) throw ConfigError("solver: num_adapt_steps must be >= 0");
    if (!(adapt_lr >= 0.0)) throw ConfigError("solver: adapt_lr must be >= 0");
    if (minibatch_K < 1) throw ConfigError("solver: minibatch_K must be >= 1");
    if (crossmodal_period < 1) throw ConfigError("solver: crossmodal_period must be >= 1");
    if (inner_dc_steps < 0) throw ConfigError("solver: inner_dc_steps must be >= 0");
    if (!(dc_step_scale > 0.0 && dc_step_scale < 2.0)) throw ConfigError("solver: dc_step_scale must lie in (0, 2)");
    if (t_start < 0) throw ConfigError("solver: t_start must be >= 0");
}

int map_timestep(int t, const SolverConfig& config, const diffusion::NoiseSchedule& sched) {
    if (t <= 0) return 0;
    const int top = config.t_start > 0 ? std::min(config.t_start, sched.T) : sched.T;
    const auto tau = static_cast<int>(std::lround(static_cast<double>(t) * top / config.T_prime));
    return std::clamp(tau, 1, sched.T);
}

bool refinement_fires(int t, const SolverConfig& config) {
    return t % config.crossmodal_period == 0 && t >= config.crossmodal_min_t;
}

double dc_step_size(const tomo::ProjectionGeometry& geom, const SolverConfig& config) {
    return config.dc_step_scale / tomo::operator_norm_sq(geom);
}

GridVolume init_latent(const std::vector<tomo::Sinogram>& y_main, const diffusion::NoiseSchedule& sched, int tau,
                       std::uint64_t seed) {
    if (y_main.empty()) throw DimensionError("init_latent: no sinograms");
    std::vector<GridImage> slices(y_main.size());
    for (std::size_t s = 0; s < y_main.size(); ++s) {
        const auto fbp = tomo::fbp_reconstruct(y_main[s]);
        const auto eps = diffusion::standard_normal_image(fbp.width, mix_seed(seed, s));
        slices[s] = diffusion::noising_sample(fbp, tau, eps, sched);
    }
    return GridVolume(std::move(slices));
}

GridImage dc_refine(const GridImage& x, const tomo::Sinogram& y, double step, int steps) {
    GridImage cur = x;
    for (int k = 0; k < steps; ++k) {
        auto r = tomo::forward_project(cur, y.geometry);
        for (std::size_t i = 0; i < r.values.size(); ++i) r.values[i] -= y.values[i];
        const auto g = tomo::back_project(r);
        for (std::size_t i = 0; i < cur.size(); ++i) cur.values[i] -= step * g.values[i];
        // a single clip after the loop throws away most of the fit on sharp edges
        clip_inplace(cur, 0.0, 1.0);
    }
    return cur;
}

GridImage diff_solver_predict_slice(const GridImage& xt, int tau, const diffusion::DenoiserParams& theta,
                                    const tomo::Sinogram& y, const diffusion::NoiseSchedule& sched, double dc_step,
                                    int inner_dc_steps) {
    if (tau < 1) throw DomainError("diff_solver_predict: t must be >= 1");
    auto x = diffusion::tweedie_estimate(xt, tau, theta, sched);
    clip_inplace(x, 0.0, 1.0);
    if (inner_dc_steps == 0) return x;
    x = dc_refine(x, y, dc_step, inner_dc_steps);
    clip_inplace(x, 0.0, 1.0);
    return x;
}

GridVolume diff_solver_predict(const GridVolume& xt, int tau, const diffusion::DenoiserParams& theta,
                               const Problem& problem, const SolverConfig& config) {
    if (xt.depth() != problem.depth()) throw DimensionError("diff_solver_predict: latent depth does not match measurements");
    const double step = dc_step_size(problem.geometry, config);
    std::vector<GridImage> out(static_cast<std::size_t>(xt.depth()));
    // slice-parallel; nested kernel regions then run single-threaded with identical results
#pragma omp parallel for schedule(static)
    for (int s = 0; s < xt.depth(); ++s)
        out[static_cast<std::size_t>(s)] =
            diff_solver_predict_slice(xt[static_cast<std::size_t>(s)], tau, theta, problem.y_main[static_cast<std::size_t>(s)],
                                      problem.schedule, step, config.inner_dc_steps);
    return GridVolume(std::move(out));
}

double data_consistency_loss(const std::vector<GridImage>& x, const std::vector<tomo::Sinogram>& y,
                             const diffusion::DenoiserParams& theta, int tau, const diffusion::NoiseSchedule& sched,
                             double dc_step, int inner_dc_steps) {
    if (x.size() != y.size() || x.empty()) throw DimensionError("data_consistency_loss: batch size mismatch");
    double loss = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k)
        loss += residual_sq(diff_solver_predict_slice(x[k], tau, theta, y[k], sched, dc_step, inner_dc_steps), y[k]);
    return loss / static_cast<double>(x.size());
}

namespace {

std::vector<bool> interior_mask(const GridImage& x) {
    std::vector<bool> m(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) m[i] = x.values[i] > 0.0 && x.values[i] < 1.0;
    return m;
}

}  // namespace

double data_consistency_loss_grad(const std::vector<GridImage>& x, const std::vector<tomo::Sinogram>& y,
                                  const diffusion::DenoiserParams& theta, int tau,
                                  const diffusion::NoiseSchedule& sched, double dc_step, int inner_dc_steps,
                                  std::vector<float>& grad) {
    if (x.size() != y.size() || x.empty()) throw DimensionError("data_consistency_loss: batch size mismatch");
    if (tau < 1) throw DomainError("data_consistency_loss: t must be >= 1");
    const nn::UNet net(theta.arch);
    grad.assign(theta.theta.size(), 0.0f);
    const double ab = sched.alpha_bar_at(tau);
    const double a = std::sqrt(ab), b = std::sqrt(1.0 - ab);
    const double inv_k = 1.0 / static_cast<double>(x.size());
    double loss = 0.0;

    for (std::size_t k = 0; k < x.size(); ++k) {
        const GridImage& xt = x[k];
        nn::Tensor in(1, xt.height, xt.width);
        for (std::size_t i = 0; i < xt.size(); ++i) in.data[i] = static_cast<float>(xt.values[i]);
        nn::Tape tape(theta.theta);
        const nn::Var iv = tape.input(std::move(in));
        const nn::Var ov = net.build(tape, iv, tau);
        const auto& eps = tape.value(ov);

        GridImage x0(xt.width, xt.height);
        for (std::size_t i = 0; i < xt.size(); ++i) x0.values[i] = (xt.values[i] - b * eps.data[i]) / a;
        // masks[0] is the Tweedie clip, masks[j] the clip after inner step j
        std::vector<std::vector<bool>> masks{interior_mask(x0)};
        clip_inplace(x0, 0.0, 1.0);
        GridImage xo = x0;
        for (int it = 0; it < inner_dc_steps; ++it) {
            auto ri = tomo::forward_project(xo, y[k].geometry);
            for (std::size_t i = 0; i < ri.values.size(); ++i) ri.values[i] -= y[k].values[i];
            const auto gi = tomo::back_project(ri);
            for (std::size_t i = 0; i < xo.size(); ++i) xo.values[i] -= dc_step * gi.values[i];
            masks.push_back(interior_mask(xo));
            clip_inplace(xo, 0.0, 1.0);
        }

        auto r = tomo::forward_project(xo, y[k].geometry);
        double rs = 0.0;
        for (std::size_t i = 0; i < r.values.size(); ++i) {
            r.values[i] -= y[k].values[i];
            rs += r.values[i] * r.values[i];
            r.values[i] *= 2.0 * inv_k;
        }
        loss += rs * inv_k;

        // d loss / d x0 = M_0 (I - step A^T A) M_1 ... (I - step A^T A) M_n (2/K) A^T r,
        // M_j zeroing the pixels clipped at stage j
        GridImage g = tomo::back_project(r);
        for (int it = inner_dc_steps; it >= 0; --it) {
            const auto& m = masks[static_cast<std::size_t>(it)];
            for (std::size_t i = 0; i < g.size(); ++i)
                if (!m[i]) g.values[i] = 0.0;
            if (it == 0) break;
            const auto hg = tomo::back_project(tomo::forward_project(g, y[k].geometry));
            for (std::size_t i = 0; i < g.size(); ++i) g.values[i] -= dc_step * hg.values[i];
        }
        nn::Tensor geps(1, xt.height, xt.width);
        for (std::size_t i = 0; i < g.size(); ++i) geps.data[i] = static_cast<float>(-b / a * g.values[i]);
        tape.backward(ov, geps, grad);
    }
    return loss;
}

diffusion::DenoiserParams adapt_weights(SolverState& state, const Problem& problem, const SolverConfig& config) {
    config.validate();
    if (config.minibatch_K > problem.depth())
        throw ConfigError("adapt_weights: minibatch_K (" + std::to_string(config.minibatch_K) +
                          ") exceeds the number of slices (" + std::to_string(problem.depth()) + ")");
    if (state.trace.empty()) {
        StepRecord r;
        r.t = state.t;
        r.tau = map_timestep(state.t, config, problem.schedule);
        state.trace.push_back(r);
    }
    StepRecord& rec = state.trace.back();
    const int tau = map_timestep(state.t, config, problem.schedule);
    const double step = dc_step_size(problem.geometry, config);

    diffusion::DenoiserParams theta = state.theta;
    std::vector<float> grad;
    for (int i = 1; i <= config.num_adapt_steps; ++i) {
        Rng rng(mix_seed(config.seed, kMinibatch, mix_seed(static_cast<std::uint64_t>(state.t), static_cast<std::uint64_t>(i))));
        const auto picks = rng.sample_without_replacement(problem.depth(), config.minibatch_K);
        std::vector<GridImage> xb;
        std::vector<tomo::Sinogram> yb;
        for (int p : picks) {
            xb.push_back(state.latent[static_cast<std::size_t>(p)]);
            yb.push_back(problem.y_main[static_cast<std::size_t>(p)]);
        }
        double loss = 0.0;
        try {
            loss = data_consistency_loss_grad(xb, yb, theta, tau, problem.schedule, step, config.inner_dc_steps, grad);
        } catch (const DomainError& e) {
            throw AdaptationError("adapt_weights: " + std::string(e.what()) + " at t=" + std::to_string(state.t) +
                                      ", step " + std::to_string(i),
                                  i, theta);
        }
        const bool finite = std::isfinite(loss) &&
                            std::all_of(grad.begin(), grad.end(), [](float g) { return std::isfinite(g); });
        if (!finite)
            throw AdaptationError("adapt_weights: non-finite gradient at t=" + std::to_string(state.t) + ", step " +
                                      std::to_string(i),
                                  i, theta);
        rec.adapt_losses.push_back(loss);
        if (config.adapt_lr == 0.0) continue;
        std::vector<float> before = theta.theta;
        for (std::size_t j = 0; j < grad.size(); ++j) theta.theta[j] -= static_cast<float>(config.adapt_lr) * grad[j];
        if (!std::all_of(theta.theta.begin(), theta.theta.end(), [](float v) { return std::isfinite(v); })) {
            theta.theta = std::move(before);
            throw AdaptationError("adapt_weights: non-finite parameters at t=" + std::to_string(state.t) + ", step " +
                                      std::to_string(i),
                                  i, theta);
        }
    }
    return theta;
}

GridVolume reconstruct(const Problem& problem, const GridVolume* aux, const diffusion::DenoiserParams& theta0,
                       const SolverConfig& config, const CrossModalFn& crossmodal, SolverState* state_out) {
    config.validate();
    theta0.validate();
    if (problem.y_main.empty()) throw DimensionError("reconstruct: no measurements");
    if (config.crossmodal_enabled) {
        if (!crossmodal) throw ConfigError("reconstruct: cross-modal refinement enabled without a model");
        if (aux == nullptr) throw ConfigError("reconstruct: cross-modal refinement enabled without an auxiliary volume");
        if (aux->depth() != problem.depth()) throw DimensionError("reconstruct: auxiliary depth does not match");
    }

    SolverState local;
    SolverState& st = state_out ? *state_out : local;
    st = SolverState{};
    st.theta = theta0;  // private copy; runs never share parameters
    st.t = config.T_prime;
    st.latent = init_latent(problem.y_main, problem.schedule, map_timestep(config.T_prime, config, problem.schedule),
                            mix_seed(config.seed, kInit));

    for (int t = config.T_prime; t >= 1; --t) {
        st.t = t;
        const int tau = map_timestep(t, config, problem.schedule);
        StepRecord fresh;
        fresh.t = t;
        fresh.tau = tau;
        st.trace.push_back(fresh);
        st.theta = adapt_weights(st, problem, config);

        GridVolume est = diff_solver_predict(st.latent, tau, st.theta, problem, config);
        StepRecord& rec = st.trace.back();
        if (config.crossmodal_enabled && refinement_fires(t, config)) {
            for (int s = 0; s < est.depth(); ++s)
                est[static_cast<std::size_t>(s)] = crossmodal(est[static_cast<std::size_t>(s)], (*aux)[static_cast<std::size_t>(s)]);
            rec.refined = true;
        }
        for (int s = 0; s < est.depth(); ++s)
            rec.residual += residual_sq(est[static_cast<std::size_t>(s)], problem.y_main[static_cast<std::size_t>(s)]);
        if (problem.ground_truth != nullptr) rec.psnr = metrics::evaluate_volume(est, *problem.ground_truth).mean_psnr();

        const int tau_next = map_timestep(t - 1, config, problem.schedule);
        for (int s = 0; s < est.depth(); ++s)
            st.latent[static_cast<std::size_t>(s)] =
                diffusion::renoise(est[static_cast<std::size_t>(s)], tau_next,
                                   mix_seed(config.seed, kRenoise, mix_seed(static_cast<std::uint64_t>(t), static_cast<std::uint64_t>(s))),
                                   problem.schedule);
    }
    st.t = 0;
    return st.latent;
}

GridVolume reconstruct(const Problem& problem, const GridVolume* aux, const diffusion::DenoiserParams& theta0,
                       const SolverConfig& config, const xmodal::TranslationModel* model, SolverState* state_out) {
    CrossModalFn fn;
    if (model != nullptr)
        fn = [model](const GridImage& est, const GridImage& a) { return xmodal::apply_translation(*model, est, a); };
    return reconstruct(problem, aux, theta0, config, fn, state_out);
}

}  // namespace xmct::solver
