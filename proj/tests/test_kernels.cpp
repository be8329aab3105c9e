#include <doctest.h>

#include <omp.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "xmct/kernels/conv.hpp"
#include "xmct/kernels/projector.hpp"
#include "xmct/rng.hpp"

using namespace xmct;
using namespace xmct::kernels;

namespace {

template <typename T>
std::vector<T> random_vec(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<T> v(n);
    for (auto& x : v) x = static_cast<T>(rng.uniform(-1.0, 1.0));
    return v;
}

template <typename T>
double rel_diff(const std::vector<T>& a, const std::vector<T>& b) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num = std::max(num, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
        den = std::max(den, std::abs(static_cast<double>(b[i])));
    }
    return num / std::max(den, 1e-300);
}

struct ThreadGuard {
    int saved = omp_get_max_threads();
    ~ThreadGuard() { omp_set_num_threads(saved); }
};

std::vector<double> angles(int n) {
    std::vector<double> a(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) a[static_cast<std::size_t>(i)] = std::numbers::pi * i / n;
    return a;
}

}  // namespace

TEST_CASE("projector: omp matches the serial reference") {
    const auto ang = angles(24);
    for (auto [pixel, det] : {std::pair{1.0, 1.0}, std::pair{0.5, 0.5}, std::pair{1.0, 1.5}}) {
        ProjectorLayout l{40, 60, pixel, det, ang};
        const auto img = random_vec<double>(40 * 40, 1);
        const auto sino = random_vec<double>(24 * 60, 2);
        std::vector<double> s1(sino.size()), s2(sino.size()), b1(img.size()), b2(img.size());
        serial::forward_project(l, img, s1);
        omp::forward_project(l, img, s2);
        CHECK(rel_diff(s2, s1) <= 1e-12);
        serial::back_project(l, sino, b1);
        omp::back_project(l, sino, b2);
        CHECK(rel_diff(b2, b1) <= 1e-12);
    }
}

TEST_CASE("projector: result does not depend on the thread count") {
    ThreadGuard guard;
    const auto ang = angles(33);
    ProjectorLayout l{48, 68, 1.0, 1.0, ang};
    const auto img = random_vec<double>(48 * 48, 3);
    const auto sino = random_vec<double>(33 * 68, 4);
    std::vector<double> f1(sino.size()), f4(sino.size()), b1(img.size()), b4(img.size());
    omp_set_num_threads(1);
    omp::forward_project(l, img, f1);
    omp::back_project(l, sino, b1);
    omp_set_num_threads(4);
    omp::forward_project(l, img, f4);
    omp::back_project(l, sino, b4);
    CHECK(f1 == f4);
    CHECK(b1 == b4);
}

TEST_CASE_TEMPLATE("conv: omp matches the serial reference", T, float, double) {
    const double tol = std::is_same_v<T, float> ? 1e-5 : 1e-12;
    for (int k : {1, 3, 5}) {
        ConvShape s{3, 5, 12, 10, k};
        const std::size_t n_in = 3 * 12 * 10, n_out = 5 * 12 * 10, n_w = static_cast<std::size_t>(5 * 3 * k * k);
        const auto in = random_vec<T>(n_in, 5), w = random_vec<T>(n_w, 6), b = random_vec<T>(5, 7);
        const auto go = random_vec<T>(n_out, 8);
        std::vector<T> o1(n_out), o2(n_out);
        serial::conv2d_forward<T>(s, in, w, b, o1);
        omp::conv2d_forward<T>(s, in, w, b, o2);
        CHECK(rel_diff(o2, o1) <= tol);

        std::vector<T> gi1(n_in), gi2(n_in), gw1(n_w), gw2(n_w), gb1(5), gb2(5);
        serial::conv2d_backward<T>(s, in, w, go, gi1, gw1, gb1);
        omp::conv2d_backward<T>(s, in, w, go, gi2, gw2, gb2);
        CHECK(rel_diff(gi2, gi1) <= tol);
        CHECK(rel_diff(gw2, gw1) <= tol);
        CHECK(rel_diff(gb2, gb1) <= tol);

        // gradients accumulate, and grad_in may be omitted
        std::vector<T> gw3 = gw2, gb3 = gb2;
        omp::conv2d_backward<T>(s, in, w, go, std::span<T>{}, gw3, gb3);
        for (std::size_t i = 0; i < n_w; ++i) CHECK(static_cast<double>(gw3[i]) == doctest::Approx(2.0 * gw2[i]).epsilon(1e-5));
    }
}

TEST_CASE("conv: a centered delta kernel copies its input") {
    ConvShape s{1, 1, 6, 7, 3};
    const auto in = random_vec<double>(42, 9);
    std::vector<double> w(9, 0.0), b{0.0}, out(42);
    w[4] = 1.0;
    serial::conv2d_forward<double>(s, in, w, b, out);
    CHECK(out == in);
    omp::conv2d_forward<double>(s, in, w, b, out);
    CHECK(rel_diff(out, in) <= 1e-15);
}

TEST_CASE("conv: result does not depend on the thread count") {
    ThreadGuard guard;
    ConvShape s{4, 6, 16, 16, 3};
    const auto in = random_vec<float>(4 * 256, 10), w = random_vec<float>(6 * 4 * 9, 11), b = random_vec<float>(6, 12);
    const auto go = random_vec<float>(6 * 256, 13);
    std::vector<float> o1(6 * 256), o4(6 * 256), gi1(4 * 256), gi4(4 * 256), gw1(216), gw4(216), gb1(6), gb4(6);
    omp_set_num_threads(1);
    omp::conv2d_forward<float>(s, in, w, b, o1);
    omp::conv2d_backward<float>(s, in, w, go, gi1, gw1, gb1);
    omp_set_num_threads(4);
    omp::conv2d_forward<float>(s, in, w, b, o4);
    omp::conv2d_backward<float>(s, in, w, go, gi4, gw4, gb4);
    CHECK(o1 == o4);
    CHECK(gi1 == gi4);
    CHECK(gw1 == gw4);
    CHECK(gb1 == gb4);
}
