#include "xmct/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "xmct/rng.hpp"

namespace xmct::diffusion {

double NoiseSchedule::alpha_bar_at(int t) const {
    if (t < 0 || t > T) throw DomainError("schedule: timestep " + std::to_string(t) + " outside [0, " + std::to_string(T) + "]");
    return alpha_bar[static_cast<std::size_t>(t)];
}

NoiseSchedule make_schedule(int T, double beta_start, double beta_end) {
    if (T < 1) throw ConfigError("schedule: T must be >= 1");
    if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0))
        throw ConfigError("schedule: need 0 < beta_start <= beta_end < 1");
    NoiseSchedule s;
    s.T = T;
    s.beta_start = beta_start;
    s.beta_end = beta_end;
    s.beta.assign(static_cast<std::size_t>(T) + 1, 0.0);
    s.alpha.assign(static_cast<std::size_t>(T) + 1, 1.0);
    s.alpha_bar.assign(static_cast<std::size_t>(T) + 1, 1.0);
    for (int t = 1; t <= T; ++t) {
        const double b = T == 1 ? beta_start : beta_start + (beta_end - beta_start) * (t - 1) / (T - 1);
        s.beta[static_cast<std::size_t>(t)] = b;
        s.alpha[static_cast<std::size_t>(t)] = 1.0 - b;
        s.alpha_bar[static_cast<std::size_t>(t)] = s.alpha_bar[static_cast<std::size_t>(t) - 1] * (1.0 - b);
    }
    return s;
}

GridImage noising_sample(const GridImage& x0, int t, const GridImage& eps, const NoiseSchedule& sched) {
    require_same_shape(x0, eps, "noising_sample");
    const double ab = sched.alpha_bar_at(t);
    const double a = std::sqrt(ab), b = std::sqrt(1.0 - ab);
    GridImage out(x0.width, x0.height);
    for (std::size_t i = 0; i < x0.size(); ++i) out.values[i] = a * x0.values[i] + b * eps.values[i];
    return out;
}

void DenoiserParams::validate() const {
    arch.validate();
    const nn::UNet net(arch);
    if (theta.size() != net.parameter_count())
        throw DimensionError("denoiser: parameter count " + std::to_string(theta.size()) + " does not match architecture (" +
                             std::to_string(net.parameter_count()) + ")");
}

DenoiserParams init_denoiser(const nn::UNetSpec& arch, std::uint64_t seed) {
    const nn::UNet net(arch);
    return {arch, net.init_parameters(seed)};
}

GridImage predict_noise(const DenoiserParams& params, const GridImage& xt, int t) {
    const nn::UNet net(params.arch);
    nn::Tensor in(1, xt.height, xt.width);
    for (std::size_t i = 0; i < xt.size(); ++i) in.data[i] = static_cast<float>(xt.values[i]);
    const auto out = net.forward(params.theta, in, t);
    GridImage eps(xt.width, xt.height);
    for (std::size_t i = 0; i < eps.size(); ++i) eps.values[i] = out.data[i];
    return eps;
}

GridImage tweedie_from_noise(const GridImage& xt, int t, const GridImage& eps_hat, const NoiseSchedule& sched) {
    require_same_shape(xt, eps_hat, "tweedie_estimate");
    if (t < 1) throw DomainError("tweedie_estimate: t must be >= 1");
    const double ab = sched.alpha_bar_at(t);
    if (ab <= 0.0) throw DomainError("tweedie_estimate: alpha_bar[t] = 0 (singular)");
    const double a = std::sqrt(ab), b = std::sqrt(1.0 - ab);
    GridImage out(xt.width, xt.height);
    for (std::size_t i = 0; i < xt.size(); ++i) out.values[i] = (xt.values[i] - b * eps_hat.values[i]) / a;
    return out;
}

GridImage tweedie_estimate(const GridImage& xt, int t, const DenoiserParams& params, const NoiseSchedule& sched) {
    if (t < 1 || t > sched.T) throw DomainError("tweedie_estimate: t outside [1, T]");
    return tweedie_from_noise(xt, t, predict_noise(params, xt, t), sched);
}

GridImage standard_normal_image(int side, std::uint64_t seed) {
    GridImage e(side, side);
    Rng rng(seed);
    for (auto& v : e.values) v = rng.normal();
    return e;
}

GridImage renoise(const GridImage& x0_est, int t_next, std::uint64_t seed, const NoiseSchedule& sched) {
    if (t_next < 0 || t_next > sched.T) throw DomainError("renoise: t_next outside [0, T]");
    if (t_next == 0) return x0_est;
    GridImage eps(x0_est.width, x0_est.height);
    Rng rng(seed);
    for (auto& v : eps.values) v = rng.normal();
    return noising_sample(x0_est, t_next, eps, sched);
}

int steps_per_epoch(int dataset_size, int batch) { return (dataset_size + batch - 1) / batch; }

std::vector<int> batch_indices(int dataset_size, int batch, std::uint64_t seed, std::int64_t global_step) {
    const int spe = steps_per_epoch(dataset_size, batch);
    const auto epoch = static_cast<std::uint64_t>(global_step / spe);
    const int pos = static_cast<int>(global_step % spe);
    std::vector<int> perm(static_cast<std::size_t>(dataset_size));
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(mix_seed(seed, 0xe90c, epoch));
    std::shuffle(perm.begin(), perm.end(), rng.engine());
    const int lo = pos * batch, hi = std::min(dataset_size, lo + batch);
    return {perm.begin() + lo, perm.begin() + hi};
}

void OptimizerSpec::validate() const {
    if (!(lr >= 0.0)) throw ConfigError("optimizer: lr must be >= 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("optimizer: momentum must lie in [0, 1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("optimizer: beta2 must lie in [0, 1)");
    if (!(max_grad_norm >= 0.0)) throw ConfigError("optimizer: max_grad_norm must be >= 0");
}

double optimizer_step(std::vector<float>& theta, std::vector<float>& grad, std::vector<float>& state,
                      const OptimizerSpec& spec, std::int64_t step) {
    double sq = 0.0;
    for (float g : grad) sq += static_cast<double>(g) * g;
    const double norm = std::sqrt(sq);
    float scale = 1.0f;
    if (spec.max_grad_norm > 0.0 && norm > spec.max_grad_norm) scale = static_cast<float>(spec.max_grad_norm / norm);
    const std::size_t n = theta.size();
    const auto lr = static_cast<float>(spec.lr);
    if (spec.kind == OptimizerKind::Adam) {
        if (state.size() != 2 * n) state.assign(2 * n, 0.0f);
        const double b1 = spec.momentum, b2 = spec.beta2;
        const auto k = static_cast<double>(std::max<std::int64_t>(step, 1));
        const auto c1 = static_cast<float>(1.0 / (1.0 - std::pow(b1, k)));
        const auto c2 = static_cast<float>(1.0 / (1.0 - std::pow(b2, k)));
        const auto fb1 = static_cast<float>(b1), fb2 = static_cast<float>(b2);
        float* m = state.data();
        float* v = state.data() + n;
        for (std::size_t i = 0; i < n; ++i) {
            const float g = scale * grad[i];
            m[i] = fb1 * m[i] + (1.0f - fb1) * g;
            v[i] = fb2 * v[i] + (1.0f - fb2) * g * g;
            theta[i] -= lr * (m[i] * c1) / (std::sqrt(v[i] * c2) + 1e-8f);
        }
    } else if (spec.momentum > 0.0) {
        if (state.size() != n) state.assign(n, 0.0f);
        const auto mu = static_cast<float>(spec.momentum);
        for (std::size_t i = 0; i < n; ++i) {
            state[i] = mu * state[i] + scale * grad[i];
            theta[i] -= lr * state[i];
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) theta[i] -= lr * scale * grad[i];
    }
    return norm;
}

TrainResult train_denoiser(const std::vector<GridImage>& dataset, const NoiseSchedule& sched, DenoiserParams init,
                           const TrainConfig& cfg, std::vector<float> initial_state) {
    if (dataset.empty()) throw ConfigError("train_denoiser: dataset is empty");
    if (cfg.batch < 1) throw ConfigError("train_denoiser: batch must be >= 1");
    if (cfg.epochs < 0) throw ConfigError("train_denoiser: epochs must be >= 0");
    cfg.optimizer.validate();
    init.validate();
    const nn::UNet net(init.arch);
    const int side = static_cast<int>(init.arch.image_side);
    for (const auto& img : dataset)
        if (img.width != side || img.height != side) throw DimensionError("train_denoiser: image size does not match model");

    TrainResult result;
    result.params = std::move(init);
    result.optimizer_state = std::move(initial_state);
    const int n = static_cast<int>(dataset.size());
    const std::int64_t spe = steps_per_epoch(n, cfg.batch);
    const std::int64_t total = spe * cfg.epochs;
    std::vector<float> grad(result.params.theta.size());
    double epoch_acc = 0.0;
    int epoch_count = 0;

    for (std::int64_t step = cfg.start_step; step < total; ++step) {
        std::fill(grad.begin(), grad.end(), 0.0f);
        const auto idx = batch_indices(n, cfg.batch, cfg.seed, step);
        const double inv = 1.0 / (static_cast<double>(idx.size()) * side * side);
        double loss = 0.0;
        for (std::size_t j = 0; j < idx.size(); ++j) {
            Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(step), j));
            const int t = rng.integer(1, sched.T);
            const double ab = sched.alpha_bar_at(t);
            const double a = std::sqrt(ab), b = std::sqrt(1.0 - ab);
            const auto& x0 = dataset[static_cast<std::size_t>(idx[j])];
            nn::Tensor xt(1, side, side), eps(1, side, side);
            for (std::size_t i = 0; i < x0.size(); ++i) {
                const double e = rng.normal();
                eps.data[i] = static_cast<float>(e);
                xt.data[i] = static_cast<float>(a * x0.values[i] + b * e);
            }
            nn::Tape tape(result.params.theta);
            const nn::Var in = tape.input(std::move(xt));
            const nn::Var out = net.build(tape, in, t);
            const auto& pred = tape.value(out);
            nn::Tensor g(1, side, side);
            for (std::size_t i = 0; i < g.size(); ++i) {
                const double d = pred.data[i] - eps.data[i];
                loss += d * d * inv;
                g.data[i] = static_cast<float>(2.0 * d * inv);
            }
            tape.backward(out, g, grad);
        }
        if (!std::isfinite(loss))
            throw TrainingError("train_denoiser: non-finite loss at step " + std::to_string(step), result.params, step);
        const DenoiserParams before = result.params;
        optimizer_step(result.params.theta, grad, result.optimizer_state, cfg.optimizer, step + 1);
        if (!std::all_of(result.params.theta.begin(), result.params.theta.end(), [](float v) { return std::isfinite(v); }))
            throw TrainingError("train_denoiser: non-finite parameters at step " + std::to_string(step), before, step);
        result.step_losses.push_back(loss);
        epoch_acc += loss;
        ++epoch_count;
        if ((step + 1) % spe == 0) {
            result.epoch_losses.push_back(epoch_acc / epoch_count);
            epoch_acc = 0.0;
            epoch_count = 0;
        }
    }
    result.steps_taken = std::max<std::int64_t>(total, cfg.start_step);
    return result;
}

}  // namespace xmct::diffusion
