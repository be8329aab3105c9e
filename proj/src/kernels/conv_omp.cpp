#include <cblas.h>

#include <algorithm>
#include <vector>

#include "xmct/kernels/conv.hpp"

// Production convolution: OpenMP im2col/col2im around a BLAS GEMM.
//   forward:      out[Cout][HW]      = W[Cout][Cin*K*K] * col[Cin*K*K][HW] + bias
//   weight grad:  gW[Cout][Cin*K*K] += gout[Cout][HW] * col^T
//   input grad:   gcol               = W^T * gout, scattered back by col2im

namespace xmct::kernels::omp {

namespace {

void gemm(CBLAS_TRANSPOSE ta, CBLAS_TRANSPOSE tb, int m, int n, int k, float alpha, const float* a, int lda,
          const float* b, int ldb, float beta, float* c, int ldc) {
    cblas_sgemm(CblasRowMajor, ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

void gemm(CBLAS_TRANSPOSE ta, CBLAS_TRANSPOSE tb, int m, int n, int k, double alpha, const double* a, int lda,
          const double* b, int ldb, double beta, double* c, int ldc) {
    cblas_dgemm(CblasRowMajor, ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

// col[(ic*K + ky)*K + kx][r*W + c] = in[ic][r + ky - pad][c + kx - pad] (zero outside)
template <typename T>
void im2col(const ConvShape& s, const T* in, T* col) {
    const int K = s.kernel, pad = K / 2, H = s.height, W = s.width, hw = H * W;
    const int rows = s.in_channels * K * K;
#pragma omp parallel for schedule(static)
    for (int row = 0; row < rows; ++row) {
        const int ic = row / (K * K), ky = (row / K) % K, kx = row % K;
        const int dy = ky - pad, dx = kx - pad;
        const T* x = in + static_cast<std::size_t>(ic) * hw;
        T* dst = col + static_cast<std::size_t>(row) * hw;
        for (int r = 0; r < H; ++r) {
            const int rr = r + dy;
            T* d = dst + r * W;
            if (rr < 0 || rr >= H) {
                std::fill(d, d + W, T(0));
                continue;
            }
            const int c0 = std::max(0, -dx), c1 = std::min(W, W - dx);
            std::fill(d, d + c0, T(0));
            std::copy(x + rr * W + c0 + dx, x + rr * W + c1 + dx, d + c0);
            std::fill(d + c1, d + W, T(0));
        }
    }
}

// in[ic] += sum over taps of the matching col rows; one input channel per iteration.
template <typename T>
void col2im_add(const ConvShape& s, const T* col, T* in) {
    const int K = s.kernel, pad = K / 2, H = s.height, W = s.width, hw = H * W;
#pragma omp parallel for schedule(static)
    for (int ic = 0; ic < s.in_channels; ++ic) {
        T* x = in + static_cast<std::size_t>(ic) * hw;
        for (int ky = 0; ky < K; ++ky)
            for (int kx = 0; kx < K; ++kx) {
                const int dy = ky - pad, dx = kx - pad;
                const T* src = col + static_cast<std::size_t>((ic * K + ky) * K + kx) * hw;
                const int c0 = std::max(0, -dx), c1 = std::min(W, W - dx);
                for (int r = std::max(0, -dy); r < std::min(H, H - dy); ++r) {
                    const T* srow = src + r * W;
                    T* xrow = x + (r + dy) * W + dx;
                    for (int c = c0; c < c1; ++c) xrow[c] += srow[c];
                }
            }
    }
}

}  // namespace

template <typename T>
void conv2d_forward(const ConvShape& s, std::span<const T> in, std::span<const T> weight, std::span<const T> bias,
                    std::span<T> out) {
    const int hw = s.height * s.width;
    const int kdim = s.in_channels * s.kernel * s.kernel;
    const T* colp = in.data();
    std::vector<T> col;
    if (s.kernel != 1) {
        col.resize(static_cast<std::size_t>(kdim) * hw);
        im2col(s, in.data(), col.data());
        colp = col.data();
    }
    for (int oc = 0; oc < s.out_channels; ++oc)
        std::fill_n(out.data() + static_cast<std::size_t>(oc) * hw, hw,
                    bias.empty() ? T(0) : bias[static_cast<std::size_t>(oc)]);
    gemm(CblasNoTrans, CblasNoTrans, s.out_channels, hw, kdim, T(1), weight.data(), kdim, colp, hw, T(1), out.data(), hw);
}

template <typename T>
void conv2d_backward(const ConvShape& s, std::span<const T> in, std::span<const T> weight, std::span<const T> grad_out,
                     std::span<T> grad_in, std::span<T> grad_weight, std::span<T> grad_bias) {
    const int hw = s.height * s.width;
    const int kdim = s.in_channels * s.kernel * s.kernel;
    const T* colp = in.data();
    std::vector<T> col;
    if (s.kernel != 1) {
        col.resize(static_cast<std::size_t>(kdim) * hw);
        im2col(s, in.data(), col.data());
        colp = col.data();
    }
    if (!grad_bias.empty())
        for (int oc = 0; oc < s.out_channels; ++oc) {
            const T* g = grad_out.data() + static_cast<std::size_t>(oc) * hw;
            T acc = 0;
            for (int i = 0; i < hw; ++i) acc += g[i];
            grad_bias[static_cast<std::size_t>(oc)] += acc;
        }
    gemm(CblasNoTrans, CblasTrans, s.out_channels, kdim, hw, T(1), grad_out.data(), hw, colp, hw, T(1),
         grad_weight.data(), kdim);
    if (grad_in.empty()) return;
    if (s.kernel == 1) {
        gemm(CblasTrans, CblasNoTrans, kdim, hw, s.out_channels, T(1), weight.data(), kdim, grad_out.data(), hw, T(1),
             grad_in.data(), hw);
        return;
    }
    std::vector<T> gcol(static_cast<std::size_t>(kdim) * hw);
    gemm(CblasTrans, CblasNoTrans, kdim, hw, s.out_channels, T(1), weight.data(), kdim, grad_out.data(), hw, T(0),
         gcol.data(), hw);
    col2im_add(s, gcol.data(), grad_in.data());
}

template void conv2d_forward<float>(const ConvShape&, std::span<const float>, std::span<const float>,
                                    std::span<const float>, std::span<float>);
template void conv2d_forward<double>(const ConvShape&, std::span<const double>, std::span<const double>,
                                     std::span<const double>, std::span<double>);
template void conv2d_backward<float>(const ConvShape&, std::span<const float>, std::span<const float>,
                                     std::span<const float>, std::span<float>, std::span<float>, std::span<float>);
template void conv2d_backward<double>(const ConvShape&, std::span<const double>, std::span<const double>,
                                      std::span<const double>, std::span<double>, std::span<double>,
                                      std::span<double>);

}  // namespace xmct::kernels::omp
