#pragma once

// Deformable sampling straight from the bilinear formula, one sample at a time.

#include <cmath>

#include "camo/tensor.hpp"

namespace oracle {

inline double bilinear(const camo::Tensor5& f, std::size_t n, std::size_t c, std::size_t t, double y,
                       double x) {
    const auto s = f.shape();
    const double y0 = std::floor(y), x0 = std::floor(x);
    double acc = 0.0;
    for (int dy = 0; dy <= 1; ++dy)
        for (int dx = 0; dx <= 1; ++dx) {
            const double yy = y0 + dy, xx = x0 + dx;
            if (yy < 0 || xx < 0 || yy >= double(s.h) || xx >= double(s.w)) continue;
            const double wy = 1.0 - std::abs(y - yy), wx = 1.0 - std::abs(x - xx);
            acc += wy * wx * f.at(n, c, t, std::size_t(yy), std::size_t(xx));
        }
    return acc;
}

/// Mean of the k_pts samples at p + g_j + offset_j; g_j is the row-major
/// side x side stencil centred on p.
inline camo::Tensor5 deform(const camo::Tensor5& f, const camo::Tensor5& off, std::size_t k_pts) {
    const auto s = f.shape();
    const int side = int(std::lround(std::sqrt(double(k_pts))));
    camo::Tensor5 out(s);
    for (std::size_t n = 0; n < s.n; ++n)
        for (std::size_t c = 0; c < s.c; ++c)
            for (std::size_t t = 0; t < s.t; ++t)
                for (std::size_t y = 0; y < s.h; ++y)
                    for (std::size_t x = 0; x < s.w; ++x) {
                        double acc = 0.0;
                        for (std::size_t j = 0; j < k_pts; ++j) {
                            const double gy = int(j) / side - side / 2;
                            const double gx = int(j) % side - side / 2;
                            acc += bilinear(f, n, c, t, double(y) + gy + off.at(n, 2 * j, t, y, x),
                                            double(x) + gx + off.at(n, 2 * j + 1, t, y, x));
                        }
                        out.at(n, c, t, y, x) = acc / double(k_pts);
                    }
    return out;
}

}  // namespace oracle
