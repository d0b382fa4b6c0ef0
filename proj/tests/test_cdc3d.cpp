#include <doctest.h>

#include <omp.h>

#include "camo/error.hpp"
#include "camo/cdc3d.hpp"
#include "camo/rng.hpp"
#include "oracles/naive_conv.hpp"

using namespace camo;

namespace {

struct Case {
    Tensor5 x;
    ConvSpec3D spec;
};

// Random small geometry, including even kernels, strides, dilation and
// padding wider than the kernel's half extent.
Case random_case(std::uint64_t seed, double theta) {
    Rng r = Rng::stream(seed, "test.cdc3d");
    Case c;
    const std::size_t cin = 1 + r.below(3), cout = 1 + r.below(3);
    Extent3 k{1 + r.below(3), 1 + r.below(3), 1 + r.below(3)};
    c.spec.stride = {1 + r.below(2), 1 + r.below(2), 1 + r.below(2)};
    c.spec.dilation = {1 + r.below(2), 1 + r.below(2), 1 + r.below(2)};
    c.spec.padding = {r.below(3), r.below(3), r.below(3)};
    auto extent = [&](std::size_t kk, std::size_t d, std::size_t p) {
        const std::size_t span = d * (kk - 1) + 1;
        const std::size_t lo = span > 2 * p ? span - 2 * p : 1;
        return std::max<std::size_t>(lo, 1) + r.below(4);
    };
    c.x = gaussian_init({1 + r.below(2), cin, extent(k.t, c.spec.dilation.t, c.spec.padding.t),
                         extent(k.h, c.spec.dilation.h, c.spec.padding.h),
                         extent(k.w, c.spec.dilation.w, c.spec.padding.w)},
                        seed * 2 + 1);
    c.spec.weights = gaussian_init({cout, cin, k.t, k.h, k.w}, seed * 2 + 2);
    c.spec.theta = theta;
    return c;
}

double dot(const Tensor5& a, const Tensor5& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

}  // namespace

TEST_SUITE("cdc3d") {

TEST_CASE("ramp with an all-ones kernel matches the oracle") {
    Tensor5 x({1, 1, 3, 3, 3});
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i);
    const ConvSpec3D spec = make_conv_spec(full({1, 1, 3, 3, 3}, 1.0), 0.5);
    CHECK(spec.padding == Extent3{1, 1, 1});
    const Tensor5 y = cdc3d_forward_fusion(x, spec);
    const Tensor5 ref = oracle::cdc_conv(x, spec, 0.5);
    // centre: vanilla 351, difference term 351 - 27 * 13 = 0
    CHECK(ref.at(0, 0, 1, 1, 1) == 175.5);
    CHECK(y.at(0, 0, 1, 1, 1) == 175.5);
    CHECK(cdc3d_forward_unified(x, spec).at(0, 0, 1, 1, 1) == 175.5);
    CHECK(max_abs_diff(y, ref) < 1e-12);
}

TEST_CASE("both forms agree with the oracle on random geometry") {
    for (std::uint64_t seed = 0; seed < 60; ++seed) {
        const double theta = Rng(seed).uniform();
        const Case c = random_case(seed, theta);
        const Tensor5 ref = oracle::cdc_conv(c.x, c.spec, theta);
        CHECK(max_abs_diff(cdc3d_forward_fusion(c.x, c.spec), ref) < 1e-10);
        CHECK(max_abs_diff(cdc3d_forward_unified(c.x, c.spec), ref) < 1e-10);
        CHECK(max_abs_diff(conv3d(c.x, c.spec), oracle::conv(c.x, c.spec)) <= 1e-12);
    }
}

TEST_CASE("theta 0 is the plain convolution") {
    const Case c = random_case(3, 0.0);
    CHECK(cdc3d_forward_fusion(c.x, c.spec) == conv3d(c.x, c.spec));
    CHECK(max_abs_diff(cdc3d_forward_unified(c.x, c.spec), conv3d(c.x, c.spec)) == 0.0);
}

TEST_CASE("theta 1 with a unit 1x1x1 kernel is identically zero") {
    const Tensor5 x = gaussian_init({2, 1, 3, 4, 5}, 4);
    const ConvSpec3D spec = make_conv_spec(full({1, 1, 1, 1, 1}, 1.0), 1.0);
    const Tensor5 u = cdc3d_forward_unified(x, spec);
    const Tensor5 f = cdc3d_forward_fusion(x, spec);
    for (double v : u.data()) CHECK(v == 0.0);
    for (double v : f.data()) CHECK(v == 0.0);
}

TEST_CASE("zero-sum kernel slices make the output independent of theta") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Case c = random_case(seed, 0.0);
        const auto ws = c.spec.weights.shape();
        const std::size_t slice = ws.t * ws.h * ws.w;
        if (slice < 2) continue;
        for (std::size_t s = 0; s < ws.n * ws.c; ++s) {
            double sum = 0.0;
            for (std::size_t i = 0; i < slice - 1; ++i) sum += c.spec.weights[s * slice + i];
            c.spec.weights[s * slice + slice - 1] = -sum;
        }
        for (double s : kernel_slice_sums(c.spec)) CHECK(std::abs(s) < 1e-12);
        ConvSpec3D one = c.spec;
        one.theta = 1.0;
        CHECK(max_abs_diff(cdc3d_forward_unified(c.x, c.spec), cdc3d_forward_unified(c.x, one)) < 1e-10);
        CHECK(max_abs_diff(cdc3d_forward_fusion(c.x, c.spec), cdc3d_forward_fusion(c.x, one)) < 1e-10);
    }
}

TEST_CASE("linear in x and affine in theta") {
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        Case c = random_case(seed, 0.458);
        Rng r(seed);
        const double a = r.uniform(-8, 8), b = r.uniform(-8, 8);
        const Tensor5 x2 = gaussian_init(c.x.shape(), seed + 100);
        const Tensor5 lhs = cdc3d_forward_unified(c.x * a + x2 * b, c.spec);
        const Tensor5 rhs = cdc3d_forward_unified(c.x, c.spec) * a + cdc3d_forward_unified(x2, c.spec) * b;
        CHECK(max_abs_diff(lhs, rhs) < 1e-9);

        ConvSpec3D s0 = c.spec, sh = c.spec, s1 = c.spec;
        s0.theta = 0.0;
        sh.theta = 0.5;
        s1.theta = 1.0;
        const Tensor5 mid = (cdc3d_forward_fusion(c.x, s0) + cdc3d_forward_fusion(c.x, s1)) * 0.5;
        CHECK(max_abs_diff(cdc3d_forward_fusion(c.x, sh), mid) < 1e-10);
    }
}

TEST_CASE("backward is the adjoint of the forward") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Case c = random_case(seed, Rng(seed + 7).uniform());
        const Tensor5 y = cdc3d_forward_unified(c.x, c.spec);
        const Tensor5 g = gaussian_init(y.shape(), seed + 50);
        const Cdc3dGrads grads = cdc3d_backward(c.x, c.spec, g);
        REQUIRE(grads.grad_x.shape() == c.x.shape());
        REQUIRE(grads.grad_w.shape() == c.spec.weights.shape());
        const double lhs = dot(y, g);
        CHECK(dot(c.x, grads.grad_x) == doctest::Approx(lhs).epsilon(1e-10));
        CHECK(dot(c.spec.weights, grads.grad_w) == doctest::Approx(lhs).epsilon(1e-10));
        const Cdc3dGrads ref = serial::cdc3d_backward(c.x, c.spec, g);
        CHECK(max_abs_diff(grads.grad_x, ref.grad_x) < 1e-12);
        CHECK(max_abs_diff(grads.grad_w, ref.grad_w) < 1e-12);
    }
}

TEST_CASE("zero upstream gradient gives zero gradients") {
    const Case c = random_case(5, 0.458);
    const Cdc3dGrads g = cdc3d_backward(c.x, c.spec, zeros(conv_output_shape(c.x.shape(), c.spec)));
    for (double v : g.grad_x.data()) CHECK(v == 0.0);
    for (double v : g.grad_w.data()) CHECK(v == 0.0);
}

TEST_CASE("parallel kernels match the serial reference bit for bit") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Case c = random_case(seed, 0.3);
        CHECK(conv3d(c.x, c.spec) == serial::conv3d(c.x, c.spec));
        CHECK(max_abs_diff(cdc3d_forward_unified(c.x, c.spec), serial::cdc3d_forward_unified(c.x, c.spec)) < 1e-12);
        CHECK(max_abs_diff(cdc3d_forward_fusion(c.x, c.spec), serial::cdc3d_forward_fusion(c.x, c.spec)) < 1e-12);
    }
}

TEST_CASE("results do not depend on the thread count") {
    const Tensor5 x = gaussian_init({2, 3, 5, 9, 9}, 1);
    const ConvSpec3D spec = make_conv_spec(gaussian_init({4, 3, 3, 3, 3}, 2), 0.458);
    const Tensor5 g = gaussian_init(conv_output_shape(x.shape(), spec), 3);
    const int saved = omp_get_max_threads();
    omp_set_num_threads(1);
    const Tensor5 y1 = cdc3d_forward_unified(x, spec);
    const Cdc3dGrads g1 = cdc3d_backward(x, spec, g);
    omp_set_num_threads(8);
    const Tensor5 y8 = cdc3d_forward_unified(x, spec);
    const Cdc3dGrads g8 = cdc3d_backward(x, spec, g);
    omp_set_num_threads(saved);
    CHECK(y1 == y8);
    CHECK(g1.grad_x == g8.grad_x);
    CHECK(g1.grad_w == g8.grad_w);
}

TEST_CASE("contract violations") {
    const Tensor5 x = gaussian_init({1, 2, 3, 4, 4}, 1);
    ConvSpec3D spec = make_conv_spec(gaussian_init({1, 3, 3, 3, 3}, 2), 0.5);
    CHECK_THROWS_AS(conv3d(x, spec), ShapeError);
    spec = make_conv_spec(gaussian_init({1, 2, 3, 3, 3}, 2), 1.5);
    CHECK_THROWS_AS(cdc3d_forward_unified(x, spec), std::invalid_argument);
    spec.theta = 0.5;
    spec.stride = {0, 1, 1};
    CHECK_THROWS_AS(cdc3d_forward_fusion(x, spec), std::invalid_argument);
    spec = make_conv_spec(gaussian_init({1, 2, 3, 3, 3}, 2), 0.5);
    spec.padding = {0, 0, 0};
    CHECK_THROWS_AS(conv3d(gaussian_init({1, 2, 2, 4, 4}, 1), spec), ShapeError);
    CHECK_THROWS_AS(cdc3d_backward(x, spec, zeros({1, 1, 1, 1, 1})), ShapeError);
}

TEST_CASE("theta presets") {
    CHECK(kDefaultTheta == 0.458);
    CHECK(kThetaYUV20K == 0.158);
    CHECK(make_conv_spec(zeros({1, 1, 3, 3, 3})).theta == kDefaultTheta);
}

}
