#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "xmct/nn/tape.hpp"

namespace xmct::nn {

enum class OutputHead : std::uint32_t {
    Linear = 0,
    // sigmoid(net + logit(clamp(input channel 0))): bounded output, identity-friendly start
    ResidualSigmoid = 1,
};

/// Architecture descriptor of the three-level U-shaped network shared by the diffusion
/// denoiser (1 input channel, timestep-conditioned, linear head) and the cross-modal
/// translator (2 input channels, unconditioned, bounded head).
struct UNetSpec {
    std::uint32_t in_channels = 1;
    std::uint32_t base_channels = 16;
    std::uint32_t time_embed_dim = 32;  // 0 disables timestep conditioning
    std::uint32_t image_side = 64;      // must be divisible by 4
    OutputHead head = OutputHead::Linear;

    void validate() const;
    bool operator==(const UNetSpec&) const = default;
};

class UNet {
public:
    explicit UNet(UNetSpec spec);

    const UNetSpec& spec() const { return spec_; }
    std::size_t parameter_count() const { return count_; }
    /// He-normal conv/dense weights, zero biases, small output layer; deterministic in seed.
    std::vector<float> init_parameters(std::uint64_t seed) const;

    /// Records the network on `tape`; `timestep` is ignored when conditioning is disabled.
    template <typename T>
    Var build(BasicTape<T>& tape, Var input, double timestep) const;

    /// Inference-only forward pass.
    Tensor forward(std::span<const float> params, const Tensor& input, double timestep) const;

private:
    struct Block {
        ConvParams conv1, conv2;
        DenseParams time_proj;
    };

    ConvParams add_conv(int in, int out, int k);
    DenseParams add_dense(int in, int out);
    Block add_block(int in, int out);
    template <typename T>
    Var block(BasicTape<T>& tape, const Block& b, Var x, Var temb) const;

    UNetSpec spec_;
    std::size_t count_ = 0;
    DenseParams time_hidden_{};
    Block enc1_, enc2_, mid_, dec2_, dec1_;
    ConvParams out_{};
    // (offset, fan_in, count) of every weight tensor, for initialization
    struct WeightSlot {
        std::size_t offset;
        int fan_in;
        std::size_t count;
    };
    std::vector<WeightSlot> weights_;
};

/// Sinusoidal embedding of a (possibly fractional) timestep.
template <typename T>
BasicTensor<T> timestep_embedding(double timestep, int dim);

}  // namespace xmct::nn
