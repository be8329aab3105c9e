#pragma once

// Reverse-mode differentiation over a fixed layer vocabulary: convolution, dense,
// per-channel bias, SiLU, sigmoid, 2x average pooling, 2x nearest upsampling, channel
// concatenation and addition. Networks are recorded eagerly onto a Tape; backward()
// walks the record in reverse, accumulating parameter gradients into a flat buffer
// laid out like the parameter vector and exposing input gradients per node.

#include <cstddef>
#include <span>
#include <vector>

namespace xmct::nn {

template <typename T>
struct BasicTensor {
    int channels = 0;
    int height = 1;
    int width = 1;
    std::vector<T> data;

    BasicTensor() = default;
    BasicTensor(int c, int h, int w, T fill = T(0))
        : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w, fill) {}

    std::size_t size() const { return data.size(); }
    std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
};

using Tensor = BasicTensor<float>;

/// Location of one conv layer's weights ([out][in][k][k]) and bias ([out]) in the flat vector.
struct ConvParams {
    int in_channels = 0;
    int out_channels = 0;
    int kernel = 3;
    std::size_t weight_offset = 0;
    std::size_t bias_offset = 0;
};

/// Dense layer: weights [out][in], bias [out].
struct DenseParams {
    int in_features = 0;
    int out_features = 0;
    std::size_t weight_offset = 0;
    std::size_t bias_offset = 0;
};

using Var = std::size_t;

template <typename T>
class BasicTape {
public:
    explicit BasicTape(std::span<const T> params) : params_(params) {}

    Var input(BasicTensor<T> value);
    Var conv2d(Var x, const ConvParams& p);
    Var dense(Var x, const DenseParams& p);
    /// x[c, :, :] += bias[c]; bias is a (C, 1, 1) node.
    Var add_channel_bias(Var x, Var bias);
    Var silu(Var x);
    Var sigmoid(Var x);
    /// logit(clamp(x[0], lo, 1 - lo)) on the first channel only; zero gradient where clamped.
    Var clamped_logit_first(Var x, double lo);
    Var avg_pool2(Var x);
    Var upsample2(Var x);
    Var concat(Var a, Var b);
    Var add(Var a, Var b);

    const BasicTensor<T>& value(Var v) const { return nodes_[v].value; }
    /// Gradient of the seeded scalar w.r.t. node v; valid after backward().
    const BasicTensor<T>& grad(Var v) const { return nodes_[v].grad; }

    /// Seeds d(loss)/d(out) = out_grad and propagates to all nodes; parameter gradients
    /// are accumulated (+=) into param_grad, which must match the parameter vector size.
    void backward(Var out, const BasicTensor<T>& out_grad, std::span<T> param_grad);

    std::size_t size() const { return nodes_.size(); }

private:
    enum class Op { Input, Conv, Dense, ChannelBias, SiLU, Sigmoid, ClampLogit, AvgPool, Upsample, Concat, Add };
    struct Node {
        Op op = Op::Input;
        Var a = 0, b = 0;
        double lo = 0.0;
        ConvParams conv{};
        DenseParams dense{};
        BasicTensor<T> value;
        BasicTensor<T> grad;
    };

    Var push(Node n);
    void backward_node(Var v, std::span<T> param_grad);

    std::span<const T> params_;
    std::vector<Node> nodes_;
};

extern template class BasicTape<float>;
extern template class BasicTape<double>;
using Tape = BasicTape<float>;

}  // namespace xmct::nn
