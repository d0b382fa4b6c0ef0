#pragma once

// 3-D central difference spatio-temporal convolution.
//
//   y(p0) = theta * sum_n w(pn) (x(p0 + pn) - x(p0)) + (1 - theta) * sum_n w(pn) x(p0 + pn)
//         = conv3d(x; w)(p0) - theta * x(p0) * sum_n w(pn)
//
// With several input channels the centre term is sum_ci x_ci(p0) * S[co, ci],
// where S[co, ci] is the sum of the (co, ci) kernel slice.
//
// p0 is the input coordinate of the kernel centre tap. Along an axis with
// kernel extent k, stride s, padding p and dilation d, output position o
// anchors at o * s - p + d * floor((k - 1) / 2). Reads outside the input are
// zero, including x(p0) itself when it lands in the padding.

#include <cstddef>
#include <vector>

#include "camo/tensor.hpp"

namespace camo {

/// Optimum reported for the MoCA-trained model; the library default.
inline constexpr double kThetaMoCA = 0.458;
/// Optimum reported for the YUV20K-trained model.
inline constexpr double kThetaYUV20K = 0.158;
inline constexpr double kDefaultTheta = kThetaMoCA;

struct Extent3 {
    std::size_t t = 1;
    std::size_t h = 1;
    std::size_t w = 1;
    friend bool operator==(const Extent3&, const Extent3&) = default;
};

struct ConvSpec3D {
    Tensor5 weights;  // (C_out, C_in, k_t, k_h, k_w)
    double theta = kDefaultTheta;
    Extent3 stride{1, 1, 1};
    Extent3 padding{0, 0, 0};
    Extent3 dilation{1, 1, 1};

    std::size_t c_out() const noexcept { return weights.shape().n; }
    std::size_t c_in() const noexcept { return weights.shape().c; }
    Extent3 kernel() const noexcept {
        return {weights.shape().t, weights.shape().h, weights.shape().w};
    }
};

/// Stride 1, dilation 1, padding floor(k / 2) per axis.
ConvSpec3D make_conv_spec(Tensor5 weights, double theta = kDefaultTheta);

/// Throws ShapeError / std::invalid_argument when x and spec are incompatible.
void validate_conv(const Shape5& x, const ConvSpec3D& spec);
Shape5 conv_output_shape(const Shape5& x, const ConvSpec3D& spec);

/// S[co * C_in + ci] = sum of weights over the (co, ci) kernel slice.
std::vector<double> kernel_slice_sums(const ConvSpec3D& spec);

/// Plain zero-padded 3-D convolution (theta is ignored).
Tensor5 conv3d(const Tensor5& x, const ConvSpec3D& spec);

/// Gradient and vanilla terms evaluated as two separate accumulations.
Tensor5 cdc3d_forward_fusion(const Tensor5& x, const ConvSpec3D& spec);

/// One convolution pass plus the centre correction from the kernel slice sums.
Tensor5 cdc3d_forward_unified(const Tensor5& x, const ConvSpec3D& spec);

struct Cdc3dGrads {
    Tensor5 grad_x;
    Tensor5 grad_w;
};

/// Exact adjoint of cdc3d_forward_unified with respect to x and the weights.
Cdc3dGrads cdc3d_backward(const Tensor5& x, const ConvSpec3D& spec, const Tensor5& grad_out);

// Single-threaded per-element loops. Kept as the reference the OpenMP kernels
// are tested against and as the baseline in bench/.
namespace serial {

Tensor5 conv3d(const Tensor5& x, const ConvSpec3D& spec);
Tensor5 cdc3d_forward_fusion(const Tensor5& x, const ConvSpec3D& spec);
Tensor5 cdc3d_forward_unified(const Tensor5& x, const ConvSpec3D& spec);
Cdc3dGrads cdc3d_backward(const Tensor5& x, const ConvSpec3D& spec, const Tensor5& grad_out);

}  // namespace serial

}  // namespace camo
