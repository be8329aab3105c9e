#include "xmct/xmodal.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "xmct/diffusion.hpp"
#include "xmct/rng.hpp"

namespace xmct::xmodal {

namespace {

nn::Tensor pack_inputs(const GridImage& estimate, const GridImage& aux) {
    require_same_shape(estimate, aux, "translation input");
    nn::Tensor t(2, estimate.height, estimate.width);
    const std::size_t plane = estimate.size();
    for (std::size_t i = 0; i < plane; ++i) {
        t.data[i] = static_cast<float>(std::clamp(estimate.values[i], 0.0, 1.0));
        t.data[plane + i] = static_cast<float>(std::clamp(aux.values[i], 0.0, 1.0));
    }
    return t;
}

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Small conditional patch discriminator over (estimate, aux, candidate):
// conv3 -> SiLU -> pool -> conv3 -> SiLU -> pool -> conv1 logits.
struct Discriminator {
    nn::ConvParams c1, c2, c3;
    std::size_t count = 0;

    explicit Discriminator(int ch) {
        auto conv = [this](int in, int out, int k) {
            nn::ConvParams p{in, out, k, count, 0};
            count += static_cast<std::size_t>(in) * out * k * k;
            p.bias_offset = count;
            count += static_cast<std::size_t>(out);
            return p;
        };
        c1 = conv(3, ch, 3);
        c2 = conv(ch, 2 * ch, 3);
        c3 = conv(2 * ch, 1, 1);
    }

    std::vector<float> init(std::uint64_t seed) const {
        std::vector<float> p(count, 0.0f);
        Rng rng(seed);
        for (const auto* c : {&c1, &c2, &c3}) {
            const double sd = std::sqrt(2.0 / (c->in_channels * c->kernel * c->kernel));
            const std::size_t n = static_cast<std::size_t>(c->in_channels) * c->out_channels * c->kernel * c->kernel;
            for (std::size_t i = 0; i < n; ++i) p[c->weight_offset + i] = static_cast<float>(sd * rng.normal());
        }
        return p;
    }

    nn::Var build(nn::Tape& tape, nn::Var x) const {
        nn::Var h = tape.silu(tape.conv2d(x, c1));
        h = tape.avg_pool2(h);
        h = tape.silu(tape.conv2d(h, c2));
        h = tape.avg_pool2(h);
        return tape.conv2d(h, c3);
    }
};

nn::Tensor with_candidate(const nn::Tensor& cond, const nn::Tensor& cand) {
    nn::Tensor t(3, cond.height, cond.width);
    std::copy(cond.data.begin(), cond.data.end(), t.data.begin());
    std::copy(cand.data.begin(), cand.data.end(), t.data.begin() + static_cast<std::ptrdiff_t>(cond.size()));
    return t;
}

// BCE-with-logits against `label`, averaged over the logit map; fills d/dlogits.
double bce_logits(const nn::Tensor& logits, double label, nn::Tensor& grad, double scale) {
    grad = nn::Tensor(logits.channels, logits.height, logits.width);
    const double inv = 1.0 / static_cast<double>(logits.size());
    double loss = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        const double z = logits.data[i];
        loss += (label > 0.5 ? softplus(-z) : softplus(z)) * inv;
        grad.data[i] = static_cast<float>(scale * (sigmoid(z) - label) * inv);
    }
    return loss;
}

bool all_finite(const std::vector<float>& v) {
    return std::all_of(v.begin(), v.end(), [](float x) { return std::isfinite(x); });
}

}  // namespace

void TranslationModel::validate() const {
    arch.validate();
    if (arch.in_channels != 2) throw ConfigError("translation model: input channel count must be 2");
    if (arch.head != nn::OutputHead::ResidualSigmoid) throw ConfigError("translation model: output head must be bounded");
    if (theta.size() != nn::UNet(arch).parameter_count())
        throw DimensionError("translation model: parameter count does not match architecture");
}

TranslationModel init_translation(int image_side, int base_channels, std::uint64_t seed) {
    TranslationModel m;
    m.arch.in_channels = 2;
    m.arch.base_channels = static_cast<std::uint32_t>(base_channels);
    m.arch.time_embed_dim = 0;
    m.arch.image_side = static_cast<std::uint32_t>(image_side);
    m.arch.head = nn::OutputHead::ResidualSigmoid;
    m.theta = nn::UNet(m.arch).init_parameters(seed);
    return m;
}

GridImage apply_translation(const TranslationModel& model, const GridImage& estimate, const GridImage& aux) {
    if (estimate.width != model.resolution() || estimate.height != model.resolution())
        throw DimensionError("apply_translation: model trained at " + std::to_string(model.resolution()) +
                             " px, input is " + std::to_string(estimate.width) + "x" + std::to_string(estimate.height));
    const nn::UNet net(model.arch);
    const auto out = net.forward(model.theta, pack_inputs(estimate, aux), 0.0);
    GridImage img(estimate.width, estimate.height);
    for (std::size_t i = 0; i < img.size(); ++i) img.values[i] = out.data[i];
    return img;
}

TranslationTrainResult train_translation(const std::vector<degrade::PairedSample>& dataset, TranslationModel init,
                                         const TranslationTrainConfig& cfg, std::vector<float> initial_state) {
    if (dataset.empty()) throw ConfigError("train_translation: dataset is empty");
    if (cfg.batch < 1) throw ConfigError("train_translation: batch must be >= 1");
    if (cfg.epochs < 0) throw ConfigError("train_translation: epochs must be >= 0");
    cfg.optimizer.validate();
    if (!(cfg.adversarial_weight >= 0.0)) throw ConfigError("train_translation: adversarial_weight must be >= 0");
    init.validate();
    const int side = init.resolution();
    for (const auto& s : dataset) {
        require_same_shape(s.degraded_main, s.ideal_main, "train_translation");
        require_same_shape(s.degraded_aux, s.ideal_main, "train_translation");
        if (s.ideal_main.width != side) throw DimensionError("train_translation: sample resolution does not match model");
    }

    TranslationTrainResult result;
    result.model = std::move(init);
    result.model.trained_with = cfg;
    const nn::UNet net(result.model.arch);
    const bool adversarial = cfg.adversarial_weight > 0.0;
    const Discriminator disc(std::max(1, cfg.discriminator_channels));
    std::vector<float> dtheta = adversarial ? disc.init(mix_seed(cfg.seed, 0xd15c)) : std::vector<float>{};
    std::vector<float> dgrad(dtheta.size()), dvel, dscratch(dtheta.size());

    const int n = static_cast<int>(dataset.size());
    const std::int64_t spe = diffusion::steps_per_epoch(n, cfg.batch);
    const std::int64_t total = spe * cfg.epochs;
    std::vector<float> grad(result.model.theta.size());
    result.optimizer_state = std::move(initial_state);
    double epoch_acc = 0.0;
    int epoch_count = 0;

    for (std::int64_t step = cfg.start_step; step < total; ++step) {
        std::fill(grad.begin(), grad.end(), 0.0f);
        std::fill(dgrad.begin(), dgrad.end(), 0.0f);
        const auto idx = diffusion::batch_indices(n, cfg.batch, cfg.seed, step);
        const double inv = 1.0 / (static_cast<double>(idx.size()) * side * side);
        double loss = 0.0, dloss = 0.0;
        for (int i : idx) {
            const auto& s = dataset[static_cast<std::size_t>(i)];
            const nn::Tensor cond = pack_inputs(s.degraded_main, s.degraded_aux);
            nn::Tape tape(result.model.theta);
            const nn::Var out = net.build(tape, tape.input(cond), 0.0);
            const auto& pred = tape.value(out);
            nn::Tensor g(1, side, side);
            for (std::size_t k = 0; k < g.size(); ++k) {
                const double d = pred.data[k] - s.ideal_main.values[k];
                loss += std::abs(d) * inv;
                g.data[k] = static_cast<float>((d > 0) - (d < 0)) * static_cast<float>(inv);
            }
            if (adversarial) {
                const double w = cfg.adversarial_weight / static_cast<double>(idx.size());
                // generator term: fool D on the fake pair
                nn::Tape dt2(dtheta);
                const nn::Var din2 = dt2.input(with_candidate(cond, pred));
                const nn::Var lo2 = disc.build(dt2, din2);
                nn::Tensor lg;
                bce_logits(dt2.value(lo2), 1.0, lg, w);
                std::fill(dscratch.begin(), dscratch.end(), 0.0f);
                dt2.backward(lo2, lg, dscratch);
                const auto& gin = dt2.grad(din2);
                const std::size_t plane = static_cast<std::size_t>(side) * side;
                for (std::size_t k = 0; k < plane; ++k) g.data[k] += gin.data[2 * plane + k];

                // discriminator terms: real pair -> 1, fake pair (detached) -> 0
                nn::Tensor ideal(1, side, side);
                for (std::size_t k = 0; k < plane; ++k) ideal.data[k] = static_cast<float>(s.ideal_main.values[k]);
                for (int which = 0; which < 2; ++which) {
                    nn::Tape tr(dtheta);
                    const nn::Var x = tr.input(with_candidate(cond, which == 0 ? ideal : pred));
                    const nn::Var lo = disc.build(tr, x);
                    nn::Tensor glo;
                    dloss += bce_logits(tr.value(lo), which == 0 ? 1.0 : 0.0, glo, 1.0 / idx.size()) / idx.size();
                    tr.backward(lo, glo, dgrad);
                }
            }
            tape.backward(out, g, grad);
        }
        if (!std::isfinite(loss) || !std::isfinite(dloss))
            throw TranslationTrainingError("train_translation: non-finite loss at step " + std::to_string(step),
                                           result.model);
        const TranslationModel before = result.model;
        diffusion::optimizer_step(result.model.theta, grad, result.optimizer_state, cfg.optimizer, step + 1);
        if (!all_finite(result.model.theta))
            throw TranslationTrainingError("train_translation: non-finite parameters at step " + std::to_string(step), before);
        if (adversarial) {
            diffusion::optimizer_step(dtheta, dgrad, dvel, cfg.optimizer, step + 1);
            result.discriminator_losses.push_back(dloss);
        }
        result.model.trained_steps = step + 1;
        result.step_losses.push_back(loss);
        epoch_acc += loss;
        ++epoch_count;
        if ((step + 1) % spe == 0) {
            result.epoch_losses.push_back(epoch_acc / epoch_count);
            epoch_acc = 0.0;
            epoch_count = 0;
        }
    }
    return result;
}

}  // namespace xmct::xmodal
