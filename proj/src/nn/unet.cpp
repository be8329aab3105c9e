#include "xmct/nn/unet.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "xmct/errors.hpp"
#include "xmct/rng.hpp"

namespace xmct::nn {

void UNetSpec::validate() const {
    if (in_channels < 1 || in_channels > 8) throw ConfigError("unet: in_channels must lie in [1, 8]");
    if (base_channels < 1 || base_channels > 256) throw ConfigError("unet: base_channels must lie in [1, 256]");
    if (time_embed_dim % 2 != 0 || time_embed_dim > 1024) throw ConfigError("unet: time_embed_dim must be even");
    if (image_side < 4 || image_side % 4 != 0) throw ConfigError("unet: image_side must be a positive multiple of 4");
    if (head == OutputHead::ResidualSigmoid && in_channels < 1) throw ConfigError("unet: residual head needs an input");
    if (head != OutputHead::Linear && head != OutputHead::ResidualSigmoid) throw ConfigError("unet: unknown head");
}

ConvParams UNet::add_conv(int in, int out, int k) {
    ConvParams p{in, out, k, count_, 0};
    const std::size_t wc = static_cast<std::size_t>(in) * out * k * k;
    weights_.push_back({count_, in * k * k, wc});
    count_ += wc;
    p.bias_offset = count_;
    count_ += static_cast<std::size_t>(out);
    return p;
}

DenseParams UNet::add_dense(int in, int out) {
    DenseParams p{in, out, count_, 0};
    const std::size_t wc = static_cast<std::size_t>(in) * out;
    weights_.push_back({count_, in, wc});
    count_ += wc;
    p.bias_offset = count_;
    count_ += static_cast<std::size_t>(out);
    return p;
}

UNet::Block UNet::add_block(int in, int out) {
    Block b;
    b.conv1 = add_conv(in, out, 3);
    if (spec_.time_embed_dim > 0) b.time_proj = add_dense(2 * static_cast<int>(spec_.time_embed_dim), out);
    b.conv2 = add_conv(out, out, 3);
    return b;
}

UNet::UNet(UNetSpec spec) : spec_(spec) {
    spec_.validate();
    const int c = static_cast<int>(spec_.base_channels);
    const int d = static_cast<int>(spec_.time_embed_dim);
    if (d > 0) time_hidden_ = add_dense(d, 2 * d);
    enc1_ = add_block(static_cast<int>(spec_.in_channels), c);
    enc2_ = add_block(c, 2 * c);
    mid_ = add_block(2 * c, 4 * c);
    dec2_ = add_block(4 * c + 2 * c, 2 * c);
    dec1_ = add_block(2 * c + c, c);
    out_ = add_conv(c, 1, 1);
}

std::vector<float> UNet::init_parameters(std::uint64_t seed) const {
    std::vector<float> p(count_, 0.0f);
    Rng rng(seed);
    for (const auto& w : weights_) {
        double stddev = std::sqrt(2.0 / w.fan_in);
        if (w.offset == out_.weight_offset) stddev *= 0.1;
        for (std::size_t i = 0; i < w.count; ++i) p[w.offset + i] = static_cast<float>(stddev * rng.normal());
    }
    return p;
}

template <typename T>
BasicTensor<T> timestep_embedding(double timestep, int dim) {
    BasicTensor<T> e(dim, 1, 1);
    const int half = dim / 2;
    for (int i = 0; i < half; ++i) {
        const double freq = std::exp(-std::log(10000.0) * i / half);
        e.data[static_cast<std::size_t>(i)] = static_cast<T>(std::sin(timestep * freq));
        e.data[static_cast<std::size_t>(i + half)] = static_cast<T>(std::cos(timestep * freq));
    }
    return e;
}

template <typename T>
Var UNet::block(BasicTape<T>& tape, const Block& b, Var x, Var temb) const {
    Var h = tape.conv2d(x, b.conv1);
    if (spec_.time_embed_dim > 0) h = tape.add_channel_bias(h, tape.dense(temb, b.time_proj));
    h = tape.silu(h);
    h = tape.conv2d(h, b.conv2);
    return tape.silu(h);
}

template <typename T>
Var UNet::build(BasicTape<T>& tape, Var input, double timestep) const {
    const int in_c = tape.value(input).channels, in_h = tape.value(input).height, in_w = tape.value(input).width;
    if (in_c != static_cast<int>(spec_.in_channels) || in_h != static_cast<int>(spec_.image_side) ||
        in_w != static_cast<int>(spec_.image_side))
        throw DimensionError("unet: input is " + std::to_string(in_c) + "x" + std::to_string(in_h) + "x" +
                             std::to_string(in_w) + ", model expects " + std::to_string(spec_.in_channels) + "x" +
                             std::to_string(spec_.image_side) + "x" + std::to_string(spec_.image_side));
    Var temb = 0;
    if (spec_.time_embed_dim > 0) {
        Var e = tape.input(timestep_embedding<T>(timestep, static_cast<int>(spec_.time_embed_dim)));
        temb = tape.silu(tape.dense(e, time_hidden_));
    }
    const Var e1 = block(tape, enc1_, input, temb);
    const Var e2 = block(tape, enc2_, tape.avg_pool2(e1), temb);
    const Var m = block(tape, mid_, tape.avg_pool2(e2), temb);
    const Var d2 = block(tape, dec2_, tape.concat(tape.upsample2(m), e2), temb);
    const Var d1 = block(tape, dec1_, tape.concat(tape.upsample2(d2), e1), temb);
    Var out = tape.conv2d(d1, out_);
    if (spec_.head == OutputHead::ResidualSigmoid) {
        out = tape.sigmoid(tape.add(out, tape.clamped_logit_first(input, 0.01)));
    }
    return out;
}

Tensor UNet::forward(std::span<const float> params, const Tensor& input, double timestep) const {
    if (params.size() != count_) throw DimensionError("unet: parameter vector size mismatch");
    Tape tape(params);
    const Var x = tape.input(input);
    const Var y = build(tape, x, timestep);
    return tape.value(y);
}

template Var UNet::build<float>(BasicTape<float>&, Var, double) const;
template Var UNet::build<double>(BasicTape<double>&, Var, double) const;
template BasicTensor<float> timestep_embedding<float>(double, int);
template BasicTensor<double> timestep_embedding<double>(double, int);

}  // namespace xmct::nn
