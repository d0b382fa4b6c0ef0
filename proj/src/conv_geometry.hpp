#pragma once

// Internal index arithmetic shared by the parallel and serial convolution code.

#include <algorithm>
#include <cstddef>

#include "camo/cdc3d.hpp"

namespace camo::detail {

struct AxisGeom {
    std::ptrdiff_t in = 0;
    std::ptrdiff_t out = 0;
    std::ptrdiff_t k = 1;
    std::ptrdiff_t stride = 1;
    std::ptrdiff_t pad = 0;
    std::ptrdiff_t dil = 1;

    std::ptrdiff_t center() const noexcept { return (k - 1) / 2; }
    /// Input coordinate read by output o at kernel tap j (may be out of range).
    std::ptrdiff_t coord(std::ptrdiff_t o, std::ptrdiff_t j) const noexcept {
        return o * stride - pad + j * dil;
    }
    std::ptrdiff_t anchor(std::ptrdiff_t o) const noexcept { return coord(o, center()); }
    bool inside(std::ptrdiff_t i) const noexcept { return i >= 0 && i < in; }

    /// Half-open range of outputs whose tap j reads inside the input.
    std::pair<std::ptrdiff_t, std::ptrdiff_t> valid_outputs(std::ptrdiff_t j) const noexcept {
        const std::ptrdiff_t off = j * dil - pad;
        // o * stride + off >= 0
        std::ptrdiff_t lo = off >= 0 ? 0 : (-off + stride - 1) / stride;
        // o * stride + off <= in - 1
        const std::ptrdiff_t top = in - 1 - off;
        std::ptrdiff_t hi = top < 0 ? 0 : top / stride + 1;
        lo = std::min(lo, out);
        hi = std::clamp(hi, lo, out);
        return {lo, hi};
    }
};

struct ConvGeom {
    std::ptrdiff_t n = 0;
    std::ptrdiff_t c_in = 0;
    std::ptrdiff_t c_out = 0;
    AxisGeom t, h, w;
};

inline ConvGeom make_geom(const Shape5& x, const ConvSpec3D& spec) {
    const Shape5 y = conv_output_shape(x, spec);
    const Extent3 k = spec.kernel();
    auto axis = [](std::size_t in, std::size_t out, std::size_t kk, std::size_t s, std::size_t p,
                   std::size_t d) {
        return AxisGeom{static_cast<std::ptrdiff_t>(in),  static_cast<std::ptrdiff_t>(out),
                        static_cast<std::ptrdiff_t>(kk),  static_cast<std::ptrdiff_t>(s),
                        static_cast<std::ptrdiff_t>(p),   static_cast<std::ptrdiff_t>(d)};
    };
    ConvGeom g;
    g.n = static_cast<std::ptrdiff_t>(x.n);
    g.c_in = static_cast<std::ptrdiff_t>(spec.c_in());
    g.c_out = static_cast<std::ptrdiff_t>(spec.c_out());
    g.t = axis(x.t, y.t, k.t, spec.stride.t, spec.padding.t, spec.dilation.t);
    g.h = axis(x.h, y.h, k.h, spec.stride.h, spec.padding.h, spec.dilation.h);
    g.w = axis(x.w, y.w, k.w, spec.stride.w, spec.padding.w, spec.dilation.w);
    return g;
}

}  // namespace camo::detail
