#pragma once

// 2D convolution kernels (stride 1, zero "same" padding, odd square kernel) on
// channel-major [C][H][W] buffers, plus their reverse-mode counterparts.
//
// `serial` is a direct per-output-element reference; `omp` is the production path,
// OpenMP im2col/col2im around a BLAS GEMM. The two variants agree to rounding, not
// bitwise.
//
// Instantiated for float (learned math) and double (gradient verification).

#include <span>

namespace xmct::kernels {

struct ConvShape {
    int in_channels = 1;
    int out_channels = 1;
    int height = 1;
    int width = 1;
    int kernel = 3;
};

namespace serial {
template <typename T>
void conv2d_forward(const ConvShape& s, std::span<const T> in, std::span<const T> weight, std::span<const T> bias,
                    std::span<T> out);
/// Accumulates (+=) into grad_in, grad_weight, grad_bias. grad_in may be empty.
template <typename T>
void conv2d_backward(const ConvShape& s, std::span<const T> in, std::span<const T> weight, std::span<const T> grad_out,
                     std::span<T> grad_in, std::span<T> grad_weight, std::span<T> grad_bias);
}  // namespace serial

namespace omp {
template <typename T>
void conv2d_forward(const ConvShape& s, std::span<const T> in, std::span<const T> weight, std::span<const T> bias,
                    std::span<T> out);
template <typename T>
void conv2d_backward(const ConvShape& s, std::span<const T> in, std::span<const T> weight, std::span<const T> grad_out,
                     std::span<T> grad_in, std::span<T> grad_weight, std::span<T> grad_bias);
}  // namespace omp

}  // namespace xmct::kernels
