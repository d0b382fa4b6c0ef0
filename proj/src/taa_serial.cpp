#include <cmath>

#include <fmt/format.h>

#include "camo/error.hpp"
#include "camo/taa.hpp"

namespace camo::serial {

namespace {

// Zero outside the plane.
double pixel(const Tensor5& f, std::size_t n, std::size_t c, std::size_t t, long long y,
             long long x) {
    const Shape5 s = f.shape();
    if (y < 0 || x < 0 || y >= static_cast<long long>(s.h) || x >= static_cast<long long>(s.w)) {
        return 0.0;
    }
    return f.at(n, c, t, static_cast<std::size_t>(y), static_cast<std::size_t>(x));
}

struct Sample {
    long long y0, x0;
    double ly, lx;
};

Sample locate(double py, double px) {
    const double fy = std::floor(py);
    const double fx = std::floor(px);
    return {static_cast<long long>(fy), static_cast<long long>(fx), py - fy, px - fx};
}

void check(const Tensor5& f_s, const OffsetField& offsets, std::size_t k_pts) {
    const Shape5 s = f_s.shape();
    const Shape5 o = offsets.values.shape();
    if (o.c != 2 * k_pts || o.n != s.n || o.t != s.t || o.h != s.h || o.w != s.w) {
        throw ShapeError(fmt::format("offset field {} incompatible with features {} at k_pts={}",
                                     o.str(), s.str(), k_pts));
    }
}

}  // namespace

Tensor5 deform_sample(const Tensor5& f_s, const OffsetField& offsets, std::size_t k_pts) {
    const auto grid = base_grid(k_pts);
    check(f_s, offsets, k_pts);
    const Shape5 s = f_s.shape();
    Tensor5 out(s);
    for (std::size_t n = 0; n < s.n; ++n)
        for (std::size_t c = 0; c < s.c; ++c)
            for (std::size_t t = 0; t < s.t; ++t)
                for (std::size_t y = 0; y < s.h; ++y)
                    for (std::size_t x = 0; x < s.w; ++x) {
                        double acc = 0.0;
                        for (std::size_t j = 0; j < k_pts; ++j) {
                            const double py = static_cast<double>(y) + grid[j].dy +
                                              offsets.values.at(n, 2 * j, t, y, x);
                            const double px = static_cast<double>(x) + grid[j].dx +
                                              offsets.values.at(n, 2 * j + 1, t, y, x);
                            const Sample sm = locate(py, px);
                            acc += (1 - sm.ly) * (1 - sm.lx) * pixel(f_s, n, c, t, sm.y0, sm.x0) +
                                   (1 - sm.ly) * sm.lx * pixel(f_s, n, c, t, sm.y0, sm.x0 + 1) +
                                   sm.ly * (1 - sm.lx) * pixel(f_s, n, c, t, sm.y0 + 1, sm.x0) +
                                   sm.ly * sm.lx * pixel(f_s, n, c, t, sm.y0 + 1, sm.x0 + 1);
                        }
                        out.at(n, c, t, y, x) = acc / static_cast<double>(k_pts);
                    }
    return out;
}

DeformGrads deform_sample_backward(const Tensor5& f_s, const OffsetField& offsets,
                                   const Tensor5& grad_out) {
    const std::size_t k_pts = offsets.k_pts();
    const auto grid = base_grid(k_pts);
    check(f_s, offsets, k_pts);
    if (grad_out.shape() != f_s.shape()) throw ShapeError("grad_out extents differ from f_s");
    const Shape5 s = f_s.shape();
    DeformGrads out{Tensor5(s), Tensor5(offsets.values.shape())};
    const auto h = static_cast<long long>(s.h);
    const auto w = static_cast<long long>(s.w);
    auto add = [&](std::size_t n, std::size_t c, std::size_t t, long long y, long long x, double v) {
        if (y >= 0 && x >= 0 && y < h && x < w) {
            out.grad_fs.at(n, c, t, static_cast<std::size_t>(y), static_cast<std::size_t>(x)) += v;
        }
    };
    for (std::size_t n = 0; n < s.n; ++n)
        for (std::size_t c = 0; c < s.c; ++c)
            for (std::size_t t = 0; t < s.t; ++t)
                for (std::size_t y = 0; y < s.h; ++y)
                    for (std::size_t x = 0; x < s.w; ++x) {
                        const double g = grad_out.at(n, c, t, y, x) / static_cast<double>(k_pts);
                        for (std::size_t j = 0; j < k_pts; ++j) {
                            const double py = static_cast<double>(y) + grid[j].dy +
                                              offsets.values.at(n, 2 * j, t, y, x);
                            const double px = static_cast<double>(x) + grid[j].dx +
                                              offsets.values.at(n, 2 * j + 1, t, y, x);
                            const Sample sm = locate(py, px);
                            const double v00 = pixel(f_s, n, c, t, sm.y0, sm.x0);
                            const double v01 = pixel(f_s, n, c, t, sm.y0, sm.x0 + 1);
                            const double v10 = pixel(f_s, n, c, t, sm.y0 + 1, sm.x0);
                            const double v11 = pixel(f_s, n, c, t, sm.y0 + 1, sm.x0 + 1);
                            add(n, c, t, sm.y0, sm.x0, g * (1 - sm.ly) * (1 - sm.lx));
                            add(n, c, t, sm.y0, sm.x0 + 1, g * (1 - sm.ly) * sm.lx);
                            add(n, c, t, sm.y0 + 1, sm.x0, g * sm.ly * (1 - sm.lx));
                            add(n, c, t, sm.y0 + 1, sm.x0 + 1, g * sm.ly * sm.lx);
                            out.grad_off.at(n, 2 * j, t, y, x) +=
                                g * ((1 - sm.lx) * (v10 - v00) + sm.lx * (v11 - v01));
                            out.grad_off.at(n, 2 * j + 1, t, y, x) +=
                                g * ((1 - sm.ly) * (v01 - v00) + sm.ly * (v11 - v10));
                        }
                    }
    return out;
}

}  // namespace camo::serial
