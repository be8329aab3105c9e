#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "xmct/metrics.hpp"
#include "xmct/solver.hpp"

using namespace xmct;
using namespace xmct::solver;

namespace {

struct Fixture {
    GridVolume truth;
    GridVolume aux;
    Problem problem;
};

Fixture make_problem(int side, int depth, int views, double noise = 0.0, std::uint64_t seed = 1) {
    phantoms::PhantomRecipe r;
    r.volume_side = side;
    r.depth = depth;
    r.gate_attempts = 0;
    auto pv = phantoms::generate_paired_volume(r, seed);
    Fixture f;
    f.truth = pv.main;
    f.aux = pv.aux;
    f.problem.geometry = tomo::make_parallel_geometry(side, views);
    f.problem.schedule = diffusion::make_schedule(1000);
    for (int s = 0; s < depth; ++s)
        f.problem.y_main.push_back(tomo::add_noise(tomo::forward_project(f.truth[static_cast<std::size_t>(s)], f.problem.geometry),
                                                   noise, seed * 100 + static_cast<std::uint64_t>(s)));
    return f;
}

diffusion::DenoiserParams zero_denoiser(int side) {
    auto p = diffusion::init_denoiser(nn::UNetSpec{1, 2, 4, static_cast<std::uint32_t>(side), nn::OutputHead::Linear}, 1);
    std::fill(p.theta.begin(), p.theta.end(), 0.0f);
    return p;
}

diffusion::DenoiserParams small_denoiser(int side, std::uint64_t seed) {
    return diffusion::init_denoiser(nn::UNetSpec{1, 2, 4, static_cast<std::uint32_t>(side), nn::OutputHead::Linear}, seed);
}

SolverConfig small_config() {
    SolverConfig c;
    c.T_prime = 4;
    c.num_adapt_steps = 2;
    c.adapt_lr = 1e-4;
    c.minibatch_K = 2;
    c.inner_dc_steps = 3;
    c.t_start = 100;
    c.seed = 5;
    return c;
}

double residual(const GridImage& x, const tomo::Sinogram& y) {
    const auto ax = tomo::forward_project(x, y.geometry);
    double s = 0.0;
    for (std::size_t i = 0; i < ax.values.size(); ++i) s += (ax.values[i] - y.values[i]) * (ax.values[i] - y.values[i]);
    return s;
}

}  // namespace

TEST_CASE("timestep mapping and cadence") {
    const auto sched = diffusion::make_schedule(1000);
    SolverConfig c;
    c.T_prime = 10;
    for (int t = 0; t <= 10; ++t) CHECK(map_timestep(t, c, sched) == 100 * t);
    c.t_start = 100;
    for (int t = 1; t <= 10; ++t) CHECK(map_timestep(t, c, sched) == 10 * t);
    c.T_prime = 3;
    CHECK(map_timestep(1, c, sched) == 33);
    CHECK(map_timestep(3, c, sched) == 100);

    c = SolverConfig{};
    std::vector<int> fired;
    for (int t = 10; t >= 1; --t)
        if (refinement_fires(t, c)) fired.push_back(t);
    CHECK(fired == std::vector<int>{10, 8, 6, 4, 2});
    CHECK_FALSE(refinement_fires(1, c));
    c.crossmodal_period = 3;
    c.crossmodal_min_t = 4;
    CHECK(refinement_fires(6, c));
    CHECK_FALSE(refinement_fires(3, c));
}

TEST_CASE("config validation") {
    SolverConfig c;
    c.T_prime = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = SolverConfig{};
    c.minibatch_K = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = SolverConfig{};
    c.adapt_lr = -1.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = SolverConfig{};
    c.crossmodal_period = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = SolverConfig{};
    c.dc_step_scale = 2.5;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("latent initialization") {
    const auto f = make_problem(32, 2, 128);
    const auto& sched = f.problem.schedule;
    const auto at_zero = init_latent(f.problem.y_main, sched, 0, 3);
    CHECK(at_zero[0].values == tomo::fbp_reconstruct(f.problem.y_main[0]).values);
    CHECK(metrics::psnr(at_zero[0], f.truth[0]) > 25.0);

    const auto noisy = init_latent(f.problem.y_main, sched, 1000, 3);
    double m = 0.0, v = 0.0;
    const auto& vals = noisy[1].values;
    for (double x : vals) m += x / static_cast<double>(vals.size());
    for (double x : vals) v += (x - m) * (x - m) / static_cast<double>(vals.size() - 1);
    CHECK(std::abs(m) < 0.1);
    CHECK(v == doctest::Approx(1.0).epsilon(0.1));
    CHECK(init_latent(f.problem.y_main, sched, 500, 3)[0].values == init_latent(f.problem.y_main, sched, 500, 3)[0].values);
    CHECK(init_latent(f.problem.y_main, sched, 500, 3)[0].values != init_latent(f.problem.y_main, sched, 500, 4)[0].values);
}

TEST_CASE("data-consistency refinement descends the residual") {
    const auto f = make_problem(32, 1, 64);
    const double step = dc_step_size(f.problem.geometry, SolverConfig{});
    GridImage x(32, 32);
    double prev = residual(x, f.problem.y_main[0]);
    for (int k = 0; k < 30; ++k) {
        x = dc_refine(x, f.problem.y_main[0], step, 1);
        const double r = residual(x, f.problem.y_main[0]);
        CHECK(r < prev);
        prev = r;
    }
    CHECK(dc_refine(x, f.problem.y_main[0], step, 0).values == x.values);
}

TEST_CASE("prediction reductions") {
    const auto f = make_problem(16, 1, 32);
    const auto& sched = f.problem.schedule;
    const auto theta = small_denoiser(16, 4);
    const double step = dc_step_size(f.problem.geometry, SolverConfig{});
    const auto xt = testing::random_image(16, 16, 9, -0.5, 1.5);

    // no inner steps: clipped Tweedie
    auto expect = diffusion::tweedie_estimate(xt, 40, theta, sched);
    clip_inplace(expect, 0.0, 1.0);
    CHECK(diff_solver_predict_slice(xt, 40, theta, f.problem.y_main[0], sched, step, 0).values == expect.values);

    // zero denoiser on a noise-free construction recovers x0 exactly
    const auto& x0 = f.truth[0];
    const auto zero = zero_denoiser(16);
    const auto built = diffusion::noising_sample(x0, 40, GridImage(16, 16), sched);
    CHECK(metrics::psnr(diff_solver_predict_slice(built, 40, zero, f.problem.y_main[0], sched, step, 0), x0) >= 60.0);
}

TEST_CASE("data-consistency loss closed forms") {
    const auto f = make_problem(16, 2, 32);
    const auto& sched = f.problem.schedule;
    const auto zero = zero_denoiser(16);
    const double step = dc_step_size(f.problem.geometry, SolverConfig{});

    std::vector<GridImage> xs;
    double y_norm = 0.0;
    for (int s = 0; s < 2; ++s) {
        xs.push_back(diffusion::noising_sample(f.truth[static_cast<std::size_t>(s)], 25, GridImage(16, 16), sched));
        y_norm += dot(f.problem.y_main[static_cast<std::size_t>(s)].values, f.problem.y_main[static_cast<std::size_t>(s)].values);
    }
    for (int inner : {0, 5})
        CHECK(data_consistency_loss(xs, f.problem.y_main, zero, 25, sched, step, inner) <= 1e-8 * y_norm / 2);

    std::vector<GridImage> zeros(2, GridImage(16, 16));
    std::vector<tomo::Sinogram> y0(2, tomo::Sinogram(f.problem.geometry));
    CHECK(data_consistency_loss(zeros, y0, zero, 25, sched, step, 3) == 0.0);

    auto y2 = f.problem.y_main;
    for (auto& y : y2)
        for (auto& v : y.values) v *= 2.0;
    const double l1 = data_consistency_loss(zeros, f.problem.y_main, zero, 25, sched, step, 0);
    const double l2 = data_consistency_loss(zeros, y2, zero, 25, sched, step, 0);
    CHECK(l1 == doctest::Approx(y_norm / 2));
    CHECK(l2 == doctest::Approx(4.0 * l1).epsilon(1e-12));
}

TEST_CASE("data-consistency gradient matches a directional difference") {
    const auto f = make_problem(16, 2, 32);
    const auto& sched = f.problem.schedule;
    auto theta = small_denoiser(16, 8);
    const double step = dc_step_size(f.problem.geometry, SolverConfig{});
    // interior estimates so the clips stay inactive along the probe direction
    std::vector<GridImage> xs;
    for (int s = 0; s < 2; ++s) {
        GridImage x0 = f.truth[static_cast<std::size_t>(s)];
        for (auto& v : x0.values) v = 0.3 + 0.4 * v;
        xs.push_back(diffusion::noising_sample(x0, 5, diffusion::standard_normal_image(16, 20 + static_cast<std::uint64_t>(s)), sched));
    }
    for (int inner : {0, 3}) {
        std::vector<float> grad;
        const double loss = data_consistency_loss_grad(xs, f.problem.y_main, theta, 5, sched, step, inner, grad);
        CHECK(loss == doctest::Approx(data_consistency_loss(xs, f.problem.y_main, theta, 5, sched, step, inner)).epsilon(1e-6));
        // probe along the normalized gradient
        double gn = 0.0;
        for (float g : grad) gn += static_cast<double>(g) * g;
        gn = std::sqrt(gn);
        REQUIRE(gn > 0.0);
        const double h = 1e-2;
        auto up = theta, down = theta;
        for (std::size_t i = 0; i < grad.size(); ++i) {
            up.theta[i] += static_cast<float>(h * grad[i] / gn);
            down.theta[i] -= static_cast<float>(h * grad[i] / gn);
        }
        const double numeric = (data_consistency_loss(xs, f.problem.y_main, up, 5, sched, step, inner) -
                                data_consistency_loss(xs, f.problem.y_main, down, 5, sched, step, inner)) /
                               (2 * h);
        CHECK(numeric == doctest::Approx(gn).epsilon(0.05));
    }
}

TEST_CASE("data-consistency gradient with saturated estimates") {
    // an untrained network at moderate noise pushes many pixels past the clip bounds
    const auto f = make_problem(8, 4, 16);
    const auto& sched = f.problem.schedule;
    const auto theta = small_denoiser(8, 6);
    const double step = dc_step_size(f.problem.geometry, SolverConfig{});
    const auto xs = init_latent(f.problem.y_main, sched, 30, 2).slices;
    for (int inner : {0, 3}) {
        std::vector<float> grad;
        const double loss = data_consistency_loss_grad(xs, f.problem.y_main, theta, 30, sched, step, inner, grad);
        double gn2 = 0.0;
        for (float g : grad) gn2 += static_cast<double>(g) * g;
        const double h = 1e-6;
        auto moved = theta;
        for (std::size_t i = 0; i < grad.size(); ++i) moved.theta[i] -= static_cast<float>(h * grad[i]);
        const double dl = data_consistency_loss(xs, f.problem.y_main, moved, 30, sched, step, inner) - loss;
        CHECK(dl < 0.0);
        CHECK(dl == doctest::Approx(-h * gn2).epsilon(0.1));
    }
}

TEST_CASE("weight adaptation") {
    auto f = make_problem(8, 4, 16);
    SolverState st;
    st.t = 3;
    st.latent = init_latent(f.problem.y_main, f.problem.schedule, 30, 2);
    st.theta = small_denoiser(8, 6);
    auto cfg = small_config();
    cfg.T_prime = 10;
    cfg.minibatch_K = 4;

    cfg.num_adapt_steps = 0;
    CHECK(adapt_weights(st, f.problem, cfg).theta == st.theta.theta);

    cfg.num_adapt_steps = 5;
    cfg.adapt_lr = 0.0;
    st.trace.clear();
    CHECK(adapt_weights(st, f.problem, cfg).theta == st.theta.theta);
    CHECK(st.trace.back().adapt_losses.size() == 5);

    // K = depth makes every step see the same batch
    cfg.num_adapt_steps = 50;
    cfg.adapt_lr = 1e-3;
    cfg.inner_dc_steps = 0;
    st.trace.clear();
    const auto adapted = adapt_weights(st, f.problem, cfg);
    const auto& losses = st.trace.back().adapt_losses;
    REQUIRE(losses.size() == 50);
    CHECK(losses.back() <= 0.8 * losses.front());
    CHECK(adapted.theta != st.theta.theta);

    // projected inner steps damp the dependence on the weights, so only plain descent here
    cfg.inner_dc_steps = 3;
    cfg.adapt_lr = 3e-2;
    st.trace.clear();
    adapt_weights(st, f.problem, cfg);
    CHECK(st.trace.back().adapt_losses.back() < st.trace.back().adapt_losses.front());

    cfg.minibatch_K = 5;
    CHECK_THROWS_AS(adapt_weights(st, f.problem, cfg), ConfigError);

    cfg.minibatch_K = 4;
    cfg.num_adapt_steps = 20;
    cfg.adapt_lr = 1e30;
    try {
        adapt_weights(st, f.problem, cfg);
        FAIL("expected an adaptation error");
    } catch (const AdaptationError& e) {
        CHECK(e.step() >= 1);
        for (float v : e.last_finite().theta) CHECK(std::isfinite(v));
    }
}

TEST_CASE("baseline reduction, cadence trace, locality, determinism") {
    auto f = make_problem(16, 4, 16, 0.0, 3);
    const auto theta = small_denoiser(16, 2);
    auto cfg = small_config();
    cfg.T_prime = 6;

    SolverState base_state, ident_state;
    const auto base = reconstruct(f.problem, &f.aux, theta, cfg, CrossModalFn{}, &base_state);
    auto on = cfg;
    on.crossmodal_enabled = true;
    const CrossModalFn identity = [](const GridImage& e, const GridImage&) { return e; };
    const auto ident = reconstruct(f.problem, &f.aux, theta, on, identity, &ident_state);
    for (int s = 0; s < 4; ++s) CHECK(base[static_cast<std::size_t>(s)].values == ident[static_cast<std::size_t>(s)].values);
    REQUIRE(base_state.trace.size() == ident_state.trace.size());
    int fired = 0;
    for (std::size_t i = 0; i < base_state.trace.size(); ++i) {
        const auto& a = base_state.trace[i];
        const auto& b = ident_state.trace[i];
        CHECK(a.adapt_losses == b.adapt_losses);
        CHECK(a.residual == b.residual);
        CHECK_FALSE(a.refined);
        CHECK(b.refined == refinement_fires(b.t, on));
        CHECK(a.t == 6 - static_cast<int>(i));
        CHECK(a.adapt_losses.size() == 2);
        fired += b.refined;
    }
    CHECK(fired == 3);  // t = 6, 4, 2
    CHECK(base_state.theta.theta != theta.theta);

    // a refinement that changes the estimate changes the result only from the first firing on
    const CrossModalFn halve = [](const GridImage& e, const GridImage&) {
        GridImage o = e;
        for (auto& v : o.values) v *= 0.5;
        return o;
    };
    SolverState halved_state;
    const auto halved = reconstruct(f.problem, &f.aux, theta, on, halve, &halved_state);
    CHECK(halved[0].values != base[0].values);
    CHECK(halved_state.trace[0].adapt_losses == base_state.trace[0].adapt_losses);

    auto frozen = cfg;
    frozen.adapt_lr = 0.0;
    SolverState fs;
    reconstruct(f.problem, &f.aux, theta, frozen, CrossModalFn{}, &fs);
    CHECK(fs.theta.theta == theta.theta);

    SolverState again;
    const auto rerun = reconstruct(f.problem, &f.aux, theta, cfg, CrossModalFn{}, &again);
    CHECK(rerun[2].values == base[2].values);
    for (std::size_t i = 0; i < again.trace.size(); ++i) CHECK(again.trace[i].adapt_losses == base_state.trace[i].adapt_losses);

    CHECK_THROWS_AS(reconstruct(f.problem, &f.aux, theta, on, CrossModalFn{}), ConfigError);
    CHECK_THROWS_AS(reconstruct(f.problem, nullptr, theta, on, identity), ConfigError);
    CHECK_THROWS_AS(reconstruct(f.problem, &f.aux, theta, on, static_cast<const xmodal::TranslationModel*>(nullptr)), ConfigError);
}

TEST_CASE("trained translation model drives the refinement") {
    auto f = make_problem(16, 4, 16, 0.0, 4);
    const auto model = xmodal::init_translation(16, 2, 3);
    auto cfg = small_config();
    cfg.crossmodal_enabled = true;
    SolverState st;
    const auto out = reconstruct(f.problem, &f.aux, small_denoiser(16, 2), cfg, &model, &st);
    CHECK(out.depth() == 4);
    for (const auto& s : out.slices)
        for (double v : s.values) CHECK((v >= 0.0 && v <= 1.0));
    CHECK(st.trace[0].refined);
}

TEST_CASE("final residual does not exceed the FBP residual on noiseless data") {
    // a briefly trained prior; an untrained network leaves the estimate far from any image
    phantoms::PhantomRecipe r;
    r.volume_side = 32;
    r.gate_attempts = 0;
    std::vector<GridImage> data;
    for (int i = 0; i < 256; ++i) data.push_back(phantoms::sample_prior_slice(r, 1000 + static_cast<std::uint64_t>(i)));
    diffusion::TrainConfig tc;
    tc.epochs = 4;
    tc.optimizer.kind = diffusion::OptimizerKind::Adam;
    tc.optimizer.lr = 2e-3;
    tc.optimizer.momentum = 0.9;
    tc.seed = 1;
    const auto sched = diffusion::make_schedule(1000);
    const auto prior =
        diffusion::train_denoiser(data, sched, diffusion::init_denoiser(nn::UNetSpec{1, 4, 8, 32, nn::OutputHead::Linear}, 2), tc)
            .params;

    int ok = 0;
    const int runs = 10;
    for (int run = 0; run < runs; ++run) {
        auto f = make_problem(32, 1, 32, 0.0, 50 + static_cast<std::uint64_t>(run));
        SolverConfig cfg;
        cfg.T_prime = 6;
        cfg.inner_dc_steps = 20;
        cfg.t_start = 100;
        cfg.num_adapt_steps = 2;
        cfg.adapt_lr = 1e-6;
        cfg.minibatch_K = 1;
        cfg.seed = static_cast<std::uint64_t>(run);
        const auto out = reconstruct(f.problem, nullptr, prior, cfg, CrossModalFn{});
        const auto& y = f.problem.y_main[0];
        ok += residual(out[0], y) <= residual(tomo::fbp_reconstruct(y), y);
    }
    CHECK(ok >= 9);
}
