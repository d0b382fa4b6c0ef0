#include "camo/cdc3d.hpp"

#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "camo/error.hpp"
#include "conv_geometry.hpp"

namespace camo {

using detail::AxisGeom;
using detail::ConvGeom;

ConvSpec3D make_conv_spec(Tensor5 weights, double theta) {
    ConvSpec3D spec;
    const Shape5 k = weights.shape();
    spec.weights = std::move(weights);
    spec.theta = theta;
    spec.padding = {k.t / 2, k.h / 2, k.w / 2};
    return spec;
}

void validate_conv(const Shape5& x, const ConvSpec3D& spec) {
    if (!(spec.theta >= 0.0 && spec.theta <= 1.0)) {
        throw std::invalid_argument(fmt::format("theta must lie in [0, 1], got {}", spec.theta));
    }
    const Shape5 k = spec.weights.shape();
    if (k.n == 0 || k.c == 0 || k.t == 0 || k.h == 0 || k.w == 0) {
        throw ShapeError(fmt::format("convolution weights have an empty extent {}", k.str()));
    }
    if (x.c != k.c) {
        throw ShapeError(
            fmt::format("input has {} channels but the kernel expects {}", x.c, k.c));
    }
    for (std::size_t s : {spec.stride.t, spec.stride.h, spec.stride.w}) {
        if (s == 0) throw std::invalid_argument("convolution stride must be positive");
    }
    for (std::size_t d : {spec.dilation.t, spec.dilation.h, spec.dilation.w}) {
        if (d == 0) throw std::invalid_argument("convolution dilation must be positive");
    }
    auto check_axis = [](const char* name, std::size_t in, std::size_t kk, std::size_t p,
                         std::size_t d) {
        if (in + 2 * p < d * (kk - 1) + 1) {
            throw ShapeError(fmt::format(
                "axis {}: extent {} with padding {} is smaller than the dilated kernel {}", name,
                in, p, d * (kk - 1) + 1));
        }
    };
    check_axis("t", x.t, k.t, spec.padding.t, spec.dilation.t);
    check_axis("h", x.h, k.h, spec.padding.h, spec.dilation.h);
    check_axis("w", x.w, k.w, spec.padding.w, spec.dilation.w);
}

Shape5 conv_output_shape(const Shape5& x, const ConvSpec3D& spec) {
    validate_conv(x, spec);
    const Extent3 k = spec.kernel();
    auto out = [](std::size_t in, std::size_t kk, std::size_t s, std::size_t p, std::size_t d) {
        return (in + 2 * p - d * (kk - 1) - 1) / s + 1;
    };
    return {x.n, spec.c_out(), out(x.t, k.t, spec.stride.t, spec.padding.t, spec.dilation.t),
            out(x.h, k.h, spec.stride.h, spec.padding.h, spec.dilation.h),
            out(x.w, k.w, spec.stride.w, spec.padding.w, spec.dilation.w)};
}

std::vector<double> kernel_slice_sums(const ConvSpec3D& spec) {
    const Shape5 k = spec.weights.shape();
    const std::size_t taps = k.t * k.h * k.w;
    std::vector<double> sums(k.n * k.c, 0.0);
    const auto w = spec.weights.data();
    for (std::size_t s = 0; s < sums.size(); ++s) {
        double acc = 0.0;
        for (std::size_t j = 0; j < taps; ++j) acc += w[s * taps + j];
        sums[s] = acc;
    }
    return sums;
}

namespace {

enum class Form { kPlain, kUnified, kFusion };

// Every output element is owned by exactly one row task and accumulated in
// the fixed order (ci, kt, kh, kw), so results do not depend on the team size.
Tensor5 forward(const Tensor5& x, const ConvSpec3D& spec, Form form) {
    const ConvGeom g = detail::make_geom(x.shape(), spec);
    Tensor5 y(conv_output_shape(x.shape(), spec));
    if (y.empty()) return y;

    const std::vector<double> sums = kernel_slice_sums(spec);
    const double theta = spec.theta;
    const double* xd = x.data().data();
    const double* wd = spec.weights.data().data();
    double* yd = y.data().data();

    const std::ptrdiff_t in_plane = g.h.in * g.w.in;
    const std::ptrdiff_t in_chan = g.t.in * in_plane;
    const std::ptrdiff_t taps = g.t.k * g.h.k * g.w.k;
    const std::ptrdiff_t rows = g.n * g.c_out * g.t.out * g.h.out;
    const std::ptrdiff_t ow_n = g.w.out;

#pragma omp parallel
    {
        std::vector<double> centre(static_cast<std::size_t>(ow_n));
        std::vector<double> grad(static_cast<std::size_t>(ow_n));

#pragma omp for schedule(static)
        for (std::ptrdiff_t r = 0; r < rows; ++r) {
            const std::ptrdiff_t oh = r % g.h.out;
            const std::ptrdiff_t ot = (r / g.h.out) % g.t.out;
            const std::ptrdiff_t co = (r / (g.h.out * g.t.out)) % g.c_out;
            const std::ptrdiff_t n = r / (g.h.out * g.t.out * g.c_out);
            double* yrow = yd + r * ow_n;
            if (form == Form::kFusion) std::fill(grad.begin(), grad.end(), 0.0);

            for (std::ptrdiff_t ci = 0; ci < g.c_in; ++ci) {
                const double* xc = xd + (n * g.c_in + ci) * in_chan;
                const double* wk = wd + (co * g.c_in + ci) * taps;

                if (form != Form::kPlain) {
                    const std::ptrdiff_t at = g.t.anchor(ot);
                    const std::ptrdiff_t ah = g.h.anchor(oh);
                    for (std::ptrdiff_t ow = 0; ow < ow_n; ++ow) {
                        const std::ptrdiff_t aw = g.w.anchor(ow);
                        centre[ow] = g.t.inside(at) && g.h.inside(ah) && g.w.inside(aw)
                                         ? xc[at * in_plane + ah * g.w.in + aw]
                                         : 0.0;
                    }
                }

                // Vanilla term: zero-padded convolution.
                for (std::ptrdiff_t kt = 0; kt < g.t.k; ++kt) {
                    const std::ptrdiff_t it = g.t.coord(ot, kt);
                    if (!g.t.inside(it)) continue;
                    for (std::ptrdiff_t kh = 0; kh < g.h.k; ++kh) {
                        const std::ptrdiff_t ih = g.h.coord(oh, kh);
                        if (!g.h.inside(ih)) continue;
                        const double* xrow = xc + it * in_plane + ih * g.w.in;
                        for (std::ptrdiff_t kw = 0; kw < g.w.k; ++kw) {
                            const double wv = wk[(kt * g.h.k + kh) * g.w.k + kw];
                            const auto [lo, hi] = g.w.valid_outputs(kw);
                            const std::ptrdiff_t off = kw * g.w.dil - g.w.pad;
                            if (g.w.stride == 1) {
                                for (std::ptrdiff_t ow = lo; ow < hi; ++ow) {
                                    yrow[ow] += wv * xrow[ow + off];
                                }
                            } else {
                                for (std::ptrdiff_t ow = lo; ow < hi; ++ow) {
                                    yrow[ow] += wv * xrow[ow * g.w.stride + off];
                                }
                            }
                        }
                    }
                }

                if (form == Form::kUnified) {
                    const double s = sums[static_cast<std::size_t>(co * g.c_in + ci)];
                    for (std::ptrdiff_t ow = 0; ow < ow_n; ++ow) yrow[ow] -= theta * s * centre[ow];
                } else if (form == Form::kFusion) {
                    // Gradient term: every tap, including padded ones, differences
                    // against the centre.
                    for (std::ptrdiff_t kt = 0; kt < g.t.k; ++kt) {
                        const std::ptrdiff_t it = g.t.coord(ot, kt);
                        for (std::ptrdiff_t kh = 0; kh < g.h.k; ++kh) {
                            const std::ptrdiff_t ih = g.h.coord(oh, kh);
                            const bool row_in = g.t.inside(it) && g.h.inside(ih);
                            const double* xrow = row_in ? xc + it * in_plane + ih * g.w.in : nullptr;
                            for (std::ptrdiff_t kw = 0; kw < g.w.k; ++kw) {
                                const double wv = wk[(kt * g.h.k + kh) * g.w.k + kw];
                                for (std::ptrdiff_t ow = 0; ow < ow_n; ++ow) {
                                    const std::ptrdiff_t iw = g.w.coord(ow, kw);
                                    const double xn = row_in && g.w.inside(iw) ? xrow[iw] : 0.0;
                                    grad[ow] += wv * (xn - centre[ow]);
                                }
                            }
                        }
                    }
                }
            }

            if (form == Form::kFusion) {
                for (std::ptrdiff_t ow = 0; ow < ow_n; ++ow) {
                    yrow[ow] = theta * grad[ow] + (1.0 - theta) * yrow[ow];
                }
            }
        }
    }
    return y;
}

}  // namespace

Tensor5 conv3d(const Tensor5& x, const ConvSpec3D& spec) { return forward(x, spec, Form::kPlain); }

Tensor5 cdc3d_forward_fusion(const Tensor5& x, const ConvSpec3D& spec) {
    return forward(x, spec, Form::kFusion);
}

Tensor5 cdc3d_forward_unified(const Tensor5& x, const ConvSpec3D& spec) {
    return forward(x, spec, Form::kUnified);
}

Cdc3dGrads cdc3d_backward(const Tensor5& x, const ConvSpec3D& spec, const Tensor5& grad_out) {
    const Shape5 ys = conv_output_shape(x.shape(), spec);
    if (grad_out.shape() != ys) {
        throw ShapeError(fmt::format("grad_out extents {} differ from forward output {}",
                                     grad_out.shape().str(), ys.str()));
    }
    const ConvGeom g = detail::make_geom(x.shape(), spec);
    Cdc3dGrads out{Tensor5(x.shape()), Tensor5(spec.weights.shape())};
    if (x.empty() || grad_out.empty()) return out;

    const std::vector<double> sums = kernel_slice_sums(spec);
    const double theta = spec.theta;
    const double* xd = x.data().data();
    const double* wd = spec.weights.data().data();
    const double* gd = grad_out.data().data();
    double* gxd = out.grad_x.data().data();
    double* gwd = out.grad_w.data().data();

    const std::ptrdiff_t in_plane = g.h.in * g.w.in;
    const std::ptrdiff_t in_chan = g.t.in * in_plane;
    const std::ptrdiff_t out_chan = g.t.out * g.h.out * g.w.out;
    const std::ptrdiff_t taps = g.t.k * g.h.k * g.w.k;

    // grad_x: each (n, ci) channel belongs to one task; co, ot, oh, taps, ow
    // are visited in a fixed order.
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t nc = 0; nc < g.n * g.c_in; ++nc) {
        const std::ptrdiff_t n = nc / g.c_in;
        const std::ptrdiff_t ci = nc % g.c_in;
        double* gx = gxd + nc * in_chan;
        for (std::ptrdiff_t co = 0; co < g.c_out; ++co) {
            const double* gy = gd + (n * g.c_out + co) * out_chan;
            const double* wk = wd + (co * g.c_in + ci) * taps;
            const double centre_w = theta * sums[static_cast<std::size_t>(co * g.c_in + ci)];
            for (std::ptrdiff_t ot = 0; ot < g.t.out; ++ot) {
                for (std::ptrdiff_t oh = 0; oh < g.h.out; ++oh) {
                    const double* grow = gy + (ot * g.h.out + oh) * g.w.out;
                    for (std::ptrdiff_t kt = 0; kt < g.t.k; ++kt) {
                        const std::ptrdiff_t it = g.t.coord(ot, kt);
                        if (!g.t.inside(it)) continue;
                        for (std::ptrdiff_t kh = 0; kh < g.h.k; ++kh) {
                            const std::ptrdiff_t ih = g.h.coord(oh, kh);
                            if (!g.h.inside(ih)) continue;
                            double* gxrow = gx + it * in_plane + ih * g.w.in;
                            for (std::ptrdiff_t kw = 0; kw < g.w.k; ++kw) {
                                const double wv = wk[(kt * g.h.k + kh) * g.w.k + kw];
                                const auto [lo, hi] = g.w.valid_outputs(kw);
                                const std::ptrdiff_t off = kw * g.w.dil - g.w.pad;
                                for (std::ptrdiff_t ow = lo; ow < hi; ++ow) {
                                    gxrow[ow * g.w.stride + off] += wv * grow[ow];
                                }
                            }
                        }
                    }
                    if (centre_w != 0.0) {
                        const std::ptrdiff_t at = g.t.anchor(ot);
                        const std::ptrdiff_t ah = g.h.anchor(oh);
                        if (!g.t.inside(at) || !g.h.inside(ah)) continue;
                        double* gxrow = gx + at * in_plane + ah * g.w.in;
                        for (std::ptrdiff_t ow = 0; ow < g.w.out; ++ow) {
                            const std::ptrdiff_t aw = g.w.anchor(ow);
                            if (g.w.inside(aw)) gxrow[aw] -= centre_w * grow[ow];
                        }
                    }
                }
            }
        }
    }

    // grad_w: each (co, ci) slice belongs to one task.
    //   dW[co,ci,tap] = sum_o g(o) x(tap(o)) - theta * sum_o g(o) x(p0(o))
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t oc = 0; oc < g.c_out * g.c_in; ++oc) {
        const std::ptrdiff_t co = oc / g.c_in;
        const std::ptrdiff_t ci = oc % g.c_in;
        double* gw = gwd + oc * taps;
        double centre_corr = 0.0;
        for (std::ptrdiff_t n = 0; n < g.n; ++n) {
            const double* xc = xd + (n * g.c_in + ci) * in_chan;
            const double* gy = gd + (n * g.c_out + co) * out_chan;
            for (std::ptrdiff_t ot = 0; ot < g.t.out; ++ot) {
                for (std::ptrdiff_t oh = 0; oh < g.h.out; ++oh) {
                    const double* grow = gy + (ot * g.h.out + oh) * g.w.out;
                    for (std::ptrdiff_t kt = 0; kt < g.t.k; ++kt) {
                        const std::ptrdiff_t it = g.t.coord(ot, kt);
                        if (!g.t.inside(it)) continue;
                        for (std::ptrdiff_t kh = 0; kh < g.h.k; ++kh) {
                            const std::ptrdiff_t ih = g.h.coord(oh, kh);
                            if (!g.h.inside(ih)) continue;
                            const double* xrow = xc + it * in_plane + ih * g.w.in;
                            for (std::ptrdiff_t kw = 0; kw < g.w.k; ++kw) {
                                const auto [lo, hi] = g.w.valid_outputs(kw);
                                const std::ptrdiff_t off = kw * g.w.dil - g.w.pad;
                                double acc = 0.0;
                                for (std::ptrdiff_t ow = lo; ow < hi; ++ow) {
                                    acc += grow[ow] * xrow[ow * g.w.stride + off];
                                }
                                gw[(kt * g.h.k + kh) * g.w.k + kw] += acc;
                            }
                        }
                    }
                    const std::ptrdiff_t at = g.t.anchor(ot);
                    const std::ptrdiff_t ah = g.h.anchor(oh);
                    if (!g.t.inside(at) || !g.h.inside(ah)) continue;
                    const double* xrow = xc + at * in_plane + ah * g.w.in;
                    for (std::ptrdiff_t ow = 0; ow < g.w.out; ++ow) {
                        const std::ptrdiff_t aw = g.w.anchor(ow);
                        if (g.w.inside(aw)) centre_corr += grow[ow] * xrow[aw];
                    }
                }
            }
        }
        if (theta != 0.0) {
            for (std::ptrdiff_t j = 0; j < taps; ++j) gw[j] -= theta * centre_corr;
        }
    }
    return out;
}

}  // namespace camo
