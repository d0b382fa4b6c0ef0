#include <fmt/format.h>

#include "camo/cdc3d.hpp"
#include "camo/error.hpp"
#include "conv_geometry.hpp"

namespace camo::serial {

using detail::ConvGeom;

namespace {

double read(const Tensor5& x, std::ptrdiff_t n, std::ptrdiff_t c, std::ptrdiff_t t,
            std::ptrdiff_t h, std::ptrdiff_t w, const ConvGeom& g) {
    if (!g.t.inside(t) || !g.h.inside(h) || !g.w.inside(w)) return 0.0;
    return x.at(n, c, t, h, w);
}

template <typename PerOutput>
Tensor5 each_output(const Tensor5& x, const ConvSpec3D& spec, PerOutput&& fn) {
    const ConvGeom g = detail::make_geom(x.shape(), spec);
    Tensor5 y(conv_output_shape(x.shape(), spec));
    for (std::ptrdiff_t n = 0; n < g.n; ++n)
        for (std::ptrdiff_t co = 0; co < g.c_out; ++co)
            for (std::ptrdiff_t ot = 0; ot < g.t.out; ++ot)
                for (std::ptrdiff_t oh = 0; oh < g.h.out; ++oh)
                    for (std::ptrdiff_t ow = 0; ow < g.w.out; ++ow)
                        y.at(n, co, ot, oh, ow) = fn(g, n, co, ot, oh, ow);
    return y;
}

}  // namespace

Tensor5 conv3d(const Tensor5& x, const ConvSpec3D& spec) {
    const Tensor5& w = spec.weights;
    return each_output(x, spec, [&](const ConvGeom& g, auto n, auto co, auto ot, auto oh, auto ow) {
        double acc = 0.0;
        for (std::ptrdiff_t ci = 0; ci < g.c_in; ++ci)
            for (std::ptrdiff_t kt = 0; kt < g.t.k; ++kt)
                for (std::ptrdiff_t kh = 0; kh < g.h.k; ++kh)
                    for (std::ptrdiff_t kw = 0; kw < g.w.k; ++kw)
                        acc += w.at(co, ci, kt, kh, kw) *
                               read(x, n, ci, g.t.coord(ot, kt), g.h.coord(oh, kh),
                                    g.w.coord(ow, kw), g);
        return acc;
    });
}

Tensor5 cdc3d_forward_fusion(const Tensor5& x, const ConvSpec3D& spec) {
    const Tensor5& w = spec.weights;
    const double theta = spec.theta;
    return each_output(x, spec, [&](const ConvGeom& g, auto n, auto co, auto ot, auto oh, auto ow) {
        double gradient = 0.0;
        double vanilla = 0.0;
        for (std::ptrdiff_t ci = 0; ci < g.c_in; ++ci) {
            const double centre =
                read(x, n, ci, g.t.anchor(ot), g.h.anchor(oh), g.w.anchor(ow), g);
            for (std::ptrdiff_t kt = 0; kt < g.t.k; ++kt)
                for (std::ptrdiff_t kh = 0; kh < g.h.k; ++kh)
                    for (std::ptrdiff_t kw = 0; kw < g.w.k; ++kw) {
                        const double wv = w.at(co, ci, kt, kh, kw);
                        const double xn = read(x, n, ci, g.t.coord(ot, kt), g.h.coord(oh, kh),
                                               g.w.coord(ow, kw), g);
                        gradient += wv * (xn - centre);
                        vanilla += wv * xn;
                    }
        }
        return theta * gradient + (1.0 - theta) * vanilla;
    });
}

Tensor5 cdc3d_forward_unified(const Tensor5& x, const ConvSpec3D& spec) {
    Tensor5 y = serial::conv3d(x, spec);
    const ConvGeom g = detail::make_geom(x.shape(), spec);
    const std::vector<double> sums = kernel_slice_sums(spec);
    for (std::ptrdiff_t n = 0; n < g.n; ++n)
        for (std::ptrdiff_t co = 0; co < g.c_out; ++co)
            for (std::ptrdiff_t ot = 0; ot < g.t.out; ++ot)
                for (std::ptrdiff_t oh = 0; oh < g.h.out; ++oh)
                    for (std::ptrdiff_t ow = 0; ow < g.w.out; ++ow) {
                        double centre = 0.0;
                        for (std::ptrdiff_t ci = 0; ci < g.c_in; ++ci) {
                            centre += sums[co * g.c_in + ci] *
                                      read(x, n, ci, g.t.anchor(ot), g.h.anchor(oh),
                                           g.w.anchor(ow), g);
                        }
                        y.at(n, co, ot, oh, ow) -= spec.theta * centre;
                    }
    return y;
}

Cdc3dGrads cdc3d_backward(const Tensor5& x, const ConvSpec3D& spec, const Tensor5& grad_out) {
    const Shape5 ys = conv_output_shape(x.shape(), spec);
    if (grad_out.shape() != ys) {
        throw ShapeError(fmt::format("grad_out extents {} differ from forward output {}",
                                     grad_out.shape().str(), ys.str()));
    }
    const ConvGeom g = detail::make_geom(x.shape(), spec);
    const Tensor5& w = spec.weights;
    const std::vector<double> sums = kernel_slice_sums(spec);
    Cdc3dGrads out{Tensor5(x.shape()), Tensor5(w.shape())};

    // Scatter every output's sensitivity back onto the inputs and weights it read.
    for (std::ptrdiff_t n = 0; n < g.n; ++n)
        for (std::ptrdiff_t co = 0; co < g.c_out; ++co)
            for (std::ptrdiff_t ot = 0; ot < g.t.out; ++ot)
                for (std::ptrdiff_t oh = 0; oh < g.h.out; ++oh)
                    for (std::ptrdiff_t ow = 0; ow < g.w.out; ++ow) {
                        const double go = grad_out.at(n, co, ot, oh, ow);
                        const std::ptrdiff_t at = g.t.anchor(ot);
                        const std::ptrdiff_t ah = g.h.anchor(oh);
                        const std::ptrdiff_t aw = g.w.anchor(ow);
                        const bool centre_in = g.t.inside(at) && g.h.inside(ah) && g.w.inside(aw);
                        for (std::ptrdiff_t ci = 0; ci < g.c_in; ++ci) {
                            const double centre = centre_in ? x.at(n, ci, at, ah, aw) : 0.0;
                            for (std::ptrdiff_t kt = 0; kt < g.t.k; ++kt)
                                for (std::ptrdiff_t kh = 0; kh < g.h.k; ++kh)
                                    for (std::ptrdiff_t kw = 0; kw < g.w.k; ++kw) {
                                        const std::ptrdiff_t it = g.t.coord(ot, kt);
                                        const std::ptrdiff_t ih = g.h.coord(oh, kh);
                                        const std::ptrdiff_t iw = g.w.coord(ow, kw);
                                        const double xn = read(x, n, ci, it, ih, iw, g);
                                        out.grad_w.at(co, ci, kt, kh, kw) +=
                                            go * (xn - spec.theta * centre);
                                        if (g.t.inside(it) && g.h.inside(ih) && g.w.inside(iw)) {
                                            out.grad_x.at(n, ci, it, ih, iw) +=
                                                go * w.at(co, ci, kt, kh, kw);
                                        }
                                    }
                            if (centre_in) {
                                out.grad_x.at(n, ci, at, ah, aw) -=
                                    spec.theta * sums[co * g.c_in + ci] * go;
                            }
                        }
                    }
    return out;
}

}  // namespace camo::serial
