#include "xmct/kernels/conv.hpp"

namespace xmct::kernels::serial {

template <typename T>
void conv2d_forward(const ConvShape& s, std::span<const T> in, std::span<const T> weight, std::span<const T> bias,
                    std::span<T> out) {
    const int pad = s.kernel / 2;
    const int hw = s.height * s.width;
    for (int oc = 0; oc < s.out_channels; ++oc)
        for (int r = 0; r < s.height; ++r)
            for (int c = 0; c < s.width; ++c) {
                T acc = bias.empty() ? T(0) : bias[static_cast<std::size_t>(oc)];
                for (int ic = 0; ic < s.in_channels; ++ic)
                    for (int ky = 0; ky < s.kernel; ++ky)
                        for (int kx = 0; kx < s.kernel; ++kx) {
                            const int rr = r + ky - pad, cc = c + kx - pad;
                            if (rr < 0 || rr >= s.height || cc < 0 || cc >= s.width) continue;
                            acc += weight[static_cast<std::size_t>(((oc * s.in_channels + ic) * s.kernel + ky) * s.kernel + kx)] *
                                   in[static_cast<std::size_t>(ic * hw + rr * s.width + cc)];
                        }
                out[static_cast<std::size_t>(oc * hw + r * s.width + c)] = acc;
            }
}

template <typename T>
void conv2d_backward(const ConvShape& s, std::span<const T> in, std::span<const T> weight, std::span<const T> grad_out,
                     std::span<T> grad_in, std::span<T> grad_weight, std::span<T> grad_bias) {
    const int pad = s.kernel / 2;
    const int hw = s.height * s.width;
    for (int oc = 0; oc < s.out_channels; ++oc)
        for (int r = 0; r < s.height; ++r)
            for (int c = 0; c < s.width; ++c) {
                const T g = grad_out[static_cast<std::size_t>(oc * hw + r * s.width + c)];
                if (!grad_bias.empty()) grad_bias[static_cast<std::size_t>(oc)] += g;
                for (int ic = 0; ic < s.in_channels; ++ic)
                    for (int ky = 0; ky < s.kernel; ++ky)
                        for (int kx = 0; kx < s.kernel; ++kx) {
                            const int rr = r + ky - pad, cc = c + kx - pad;
                            if (rr < 0 || rr >= s.height || cc < 0 || cc >= s.width) continue;
                            const auto wi = static_cast<std::size_t>(((oc * s.in_channels + ic) * s.kernel + ky) * s.kernel + kx);
                            const auto xi = static_cast<std::size_t>(ic * hw + rr * s.width + cc);
                            grad_weight[wi] += g * in[xi];
                            if (!grad_in.empty()) grad_in[xi] += g * weight[wi];
                        }
            }
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

}  // namespace xmct::kernels::serial
