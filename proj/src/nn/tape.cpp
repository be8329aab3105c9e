#include "xmct/nn/tape.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "xmct/errors.hpp"
#include "xmct/kernels/conv.hpp"

namespace xmct::nn {

namespace {

template <typename T>
T sigmoid_of(T x) {
    return T(1) / (T(1) + std::exp(-x));
}

template <typename T>
void accumulate(BasicTensor<T>& dst, const BasicTensor<T>& like) {
    if (dst.data.empty()) dst = BasicTensor<T>(like.channels, like.height, like.width);
}

}  // namespace

template <typename T>
Var BasicTape<T>::push(Node n) {
    nodes_.push_back(std::move(n));
    return nodes_.size() - 1;
}

template <typename T>
Var BasicTape<T>::input(BasicTensor<T> value) {
    Node n;
    n.op = Op::Input;
    n.value = std::move(value);
    return push(std::move(n));
}

template <typename T>
Var BasicTape<T>::conv2d(Var x, const ConvParams& p) {
    const auto& in = nodes_[x].value;
    if (in.channels != p.in_channels) throw DimensionError("conv2d: channel mismatch");
    Node n;
    n.op = Op::Conv;
    n.a = x;
    n.conv = p;
    n.value = BasicTensor<T>(p.out_channels, in.height, in.width);
    const kernels::ConvShape s{p.in_channels, p.out_channels, in.height, in.width, p.kernel};
    const std::size_t wcount = static_cast<std::size_t>(p.out_channels) * p.in_channels * p.kernel * p.kernel;
    kernels::omp::conv2d_forward<T>(s, in.data, params_.subspan(p.weight_offset, wcount),
                                    params_.subspan(p.bias_offset, static_cast<std::size_t>(p.out_channels)),
                                    n.value.data);
    return push(std::move(n));
}

template <typename T>
Var BasicTape<T>::dense(Var x, const DenseParams& p) {
    const auto& in = nodes_[x].value;
    if (in.size() != static_cast<std::size_t>(p.in_features)) throw DimensionError("dense: feature mismatch");
    Node n;
    n.op = Op::Dense;
    n.a = x;
    n.dense = p;
    n.value = BasicTensor<T>(p.out_features, 1, 1);
    for (int o = 0; o < p.out_features; ++o) {
        T acc = params_[p.bias_offset + static_cast<std::size_t>(o)];
        const T* w = params_.data() + p.weight_offset + static_cast<std::size_t>(o) * p.in_features;
        for (int i = 0; i < p.in_features; ++i) acc += w[i] * in.data[static_cast<std::size_t>(i)];
        n.value.data[static_cast<std::size_t>(o)] = acc;
    }
    return push(std::move(n));
}

template <typename T>
Var BasicTape<T>::add_channel_bias(Var x, Var bias) {
    const auto& in = nodes_[x].value;
    const auto& bv = nodes_[bias].value;
    if (bv.size() != static_cast<std::size_t>(in.channels)) throw DimensionError("add_channel_bias: channel mismatch");
    Node n;
    n.op = Op::ChannelBias;
    n.a = x;
    n.b = bias;
    n.value = in;
    const std::size_t plane = in.plane();
    for (int c = 0; c < in.channels; ++c)
        for (std::size_t i = 0; i < plane; ++i) n.value.data[c * plane + i] += bv.data[static_cast<std::size_t>(c)];
    return push(std::move(n));
}

template <typename T>
Var BasicTape<T>::silu(Var x) {
    Node n;
    n.op = Op::SiLU;
    n.a = x;
    n.value = nodes_[x].value;
    for (auto& v : n.value.data) v = v * sigmoid_of(v);
    return push(std::move(n));
}

template <typename T>
Var BasicTape<T>::sigmoid(Var x) {
    Node n;
    n.op = Op::Sigmoid;
    n.a = x;
    n.value = nodes_[x].value;
    for (auto& v : n.value.data) v = sigmoid_of(v);
    return push(std::move(n));
}

template <typename T>
Var BasicTape<T>::clamped_logit_first(Var x, double lo) {
    const auto& in = nodes_[x].value;
    Node n;
    n.op = Op::ClampLogit;
    n.a = x;
    n.lo = lo;
    n.value = BasicTensor<T>(1, in.height, in.width);
    for (std::size_t i = 0; i < n.value.size(); ++i) {
        const double v = std::clamp(static_cast<double>(in.data[i]), lo, 1.0 - lo);
        n.value.data[i] = static_cast<T>(std::log(v / (1.0 - v)));
    }
    return push(std::move(n));
}

template <typename T>
Var BasicTape<T>::avg_pool2(Var x) {
    const auto& in = nodes_[x].value;
    if (in.height % 2 || in.width % 2) throw DimensionError("avg_pool2: odd spatial size");
    Node n;
    n.op = Op::AvgPool;
    n.a = x;
    n.value = BasicTensor<T>(in.channels, in.height / 2, in.width / 2);
    const int oh = in.height / 2, ow = in.width / 2;
    for (int c = 0; c < in.channels; ++c)
        for (int r = 0; r < oh; ++r)
            for (int q = 0; q < ow; ++q) {
                const T* p = in.data.data() + (static_cast<std::size_t>(c) * in.height + 2 * r) * in.width + 2 * q;
                n.value.data[(static_cast<std::size_t>(c) * oh + r) * ow + q] =
                    T(0.25) * (p[0] + p[1] + p[in.width] + p[in.width + 1]);
            }
    return push(std::move(n));
}

template <typename T>
Var BasicTape<T>::upsample2(Var x) {
    const auto& in = nodes_[x].value;
    Node n;
    n.op = Op::Upsample;
    n.a = x;
    n.value = BasicTensor<T>(in.channels, in.height * 2, in.width * 2);
    const int oh = in.height * 2, ow = in.width * 2;
    for (int c = 0; c < in.channels; ++c)
        for (int r = 0; r < oh; ++r)
            for (int q = 0; q < ow; ++q)
                n.value.data[(static_cast<std::size_t>(c) * oh + r) * ow + q] =
                    in.data[(static_cast<std::size_t>(c) * in.height + r / 2) * in.width + q / 2];
    return push(std::move(n));
}

template <typename T>
Var BasicTape<T>::concat(Var a, Var b) {
    const auto& va = nodes_[a].value;
    const auto& vb = nodes_[b].value;
    if (va.height != vb.height || va.width != vb.width) throw DimensionError("concat: spatial mismatch");
    Node n;
    n.op = Op::Concat;
    n.a = a;
    n.b = b;
    n.value = BasicTensor<T>(va.channels + vb.channels, va.height, va.width);
    std::copy(va.data.begin(), va.data.end(), n.value.data.begin());
    std::copy(vb.data.begin(), vb.data.end(), n.value.data.begin() + static_cast<std::ptrdiff_t>(va.size()));
    return push(std::move(n));
}

template <typename T>
Var BasicTape<T>::add(Var a, Var b) {
    const auto& va = nodes_[a].value;
    const auto& vb = nodes_[b].value;
    if (va.size() != vb.size()) throw DimensionError("add: size mismatch");
    Node n;
    n.op = Op::Add;
    n.a = a;
    n.b = b;
    n.value = va;
    for (std::size_t i = 0; i < va.size(); ++i) n.value.data[i] += vb.data[i];
    return push(std::move(n));
}

template <typename T>
void BasicTape<T>::backward(Var out, const BasicTensor<T>& out_grad, std::span<T> param_grad) {
    if (out_grad.size() != nodes_[out].value.size()) throw DimensionError("backward: seed gradient size mismatch");
    if (param_grad.size() != params_.size()) throw DimensionError("backward: parameter gradient size mismatch");
    for (auto& n : nodes_) n.grad = BasicTensor<T>();
    nodes_[out].grad = out_grad;
    for (Var v = out + 1; v-- > 0;) {
        if (nodes_[v].grad.data.empty()) continue;
        backward_node(v, param_grad);
    }
}

template <typename T>
void BasicTape<T>::backward_node(Var v, std::span<T> param_grad) {
    Node& n = nodes_[v];
    const auto& g = n.grad;
    switch (n.op) {
        case Op::Input:
            break;
        case Op::Conv: {
            Node& src = nodes_[n.a];
            accumulate(src.grad, src.value);
            const auto& p = n.conv;
            const kernels::ConvShape s{p.in_channels, p.out_channels, src.value.height, src.value.width, p.kernel};
            const std::size_t wcount = static_cast<std::size_t>(p.out_channels) * p.in_channels * p.kernel * p.kernel;
            kernels::omp::conv2d_backward<T>(s, src.value.data, params_.subspan(p.weight_offset, wcount), g.data,
                                             src.grad.data, param_grad.subspan(p.weight_offset, wcount),
                                             param_grad.subspan(p.bias_offset, static_cast<std::size_t>(p.out_channels)));
            break;
        }
        case Op::Dense: {
            Node& src = nodes_[n.a];
            accumulate(src.grad, src.value);
            const auto& p = n.dense;
            for (int o = 0; o < p.out_features; ++o) {
                const T go = g.data[static_cast<std::size_t>(o)];
                param_grad[p.bias_offset + static_cast<std::size_t>(o)] += go;
                const std::size_t row = p.weight_offset + static_cast<std::size_t>(o) * p.in_features;
                for (int i = 0; i < p.in_features; ++i) {
                    param_grad[row + static_cast<std::size_t>(i)] += go * src.value.data[static_cast<std::size_t>(i)];
                    src.grad.data[static_cast<std::size_t>(i)] += go * params_[row + static_cast<std::size_t>(i)];
                }
            }
            break;
        }
        case Op::ChannelBias: {
            Node& src = nodes_[n.a];
            accumulate(src.grad, src.value);
            for (std::size_t i = 0; i < g.size(); ++i) src.grad.data[i] += g.data[i];
            Node& bn = nodes_[n.b];
            accumulate(bn.grad, bn.value);
            const std::size_t plane = g.plane();
            for (int c = 0; c < g.channels; ++c) {
                T acc = 0;
                for (std::size_t i = 0; i < plane; ++i) acc += g.data[c * plane + i];
                bn.grad.data[static_cast<std::size_t>(c)] += acc;
            }
            break;
        }
        case Op::SiLU: {
            Node& src = nodes_[n.a];
            accumulate(src.grad, src.value);
            for (std::size_t i = 0; i < g.size(); ++i) {
                const T x = src.value.data[i];
                const T s = sigmoid_of(x);
                src.grad.data[i] += g.data[i] * s * (T(1) + x * (T(1) - s));
            }
            break;
        }
        case Op::Sigmoid: {
            Node& src = nodes_[n.a];
            accumulate(src.grad, src.value);
            for (std::size_t i = 0; i < g.size(); ++i) {
                const T y = n.value.data[i];
                src.grad.data[i] += g.data[i] * y * (T(1) - y);
            }
            break;
        }
        case Op::ClampLogit: {
            Node& src = nodes_[n.a];
            accumulate(src.grad, src.value);
            for (std::size_t i = 0; i < g.size(); ++i) {
                const double v = static_cast<double>(src.value.data[i]);
                if (v > n.lo && v < 1.0 - n.lo) src.grad.data[i] += g.data[i] / static_cast<T>(v * (1.0 - v));
            }
            break;
        }
        case Op::AvgPool: {
            Node& src = nodes_[n.a];
            accumulate(src.grad, src.value);
            const int oh = g.height, ow = g.width, iw = src.value.width;
            for (int c = 0; c < g.channels; ++c)
                for (int r = 0; r < oh; ++r)
                    for (int q = 0; q < ow; ++q) {
                        const T gv = T(0.25) * g.data[(static_cast<std::size_t>(c) * oh + r) * ow + q];
                        T* p = src.grad.data.data() + (static_cast<std::size_t>(c) * src.value.height + 2 * r) * iw + 2 * q;
                        p[0] += gv;
                        p[1] += gv;
                        p[iw] += gv;
                        p[iw + 1] += gv;
                    }
            break;
        }
        case Op::Upsample: {
            Node& src = nodes_[n.a];
            accumulate(src.grad, src.value);
            const int oh = g.height, ow = g.width;
            for (int c = 0; c < g.channels; ++c)
                for (int r = 0; r < oh; ++r)
                    for (int q = 0; q < ow; ++q)
                        src.grad.data[(static_cast<std::size_t>(c) * src.value.height + r / 2) * src.value.width + q / 2] +=
                            g.data[(static_cast<std::size_t>(c) * oh + r) * ow + q];
            break;
        }
        case Op::Concat: {
            Node& na = nodes_[n.a];
            accumulate(na.grad, na.value);
            for (std::size_t i = 0; i < na.value.size(); ++i) na.grad.data[i] += g.data[i];
            Node& nb = nodes_[n.b];
            accumulate(nb.grad, nb.value);
            const std::size_t off = na.value.size();
            for (std::size_t i = 0; i < nb.value.size(); ++i) nb.grad.data[i] += g.data[off + i];
            break;
        }
        case Op::Add: {
            for (Var src_id : {n.a, n.b}) {
                Node& src = nodes_[src_id];
                accumulate(src.grad, src.value);
                for (std::size_t i = 0; i < g.size(); ++i) src.grad.data[i] += g.data[i];
            }
            break;
        }
    }
}

template class BasicTape<float>;
template class BasicTape<double>;

}  // namespace xmct::nn
