#pragma once

#include <cmath>
#include <cstddef>

namespace camo::detail {

// Four-corner bilinear stencil at (py, px). Corners outside [0, h) x [0, w)
// are flagged invalid and read as zero.
struct BilinearTap {
    std::ptrdiff_t y0, x0;
    double ly, lx;  // fractional parts in [0, 1)
    bool in00, in01, in10, in11;

    static BilinearTap at(double py, double px, std::ptrdiff_t h, std::ptrdiff_t w) noexcept {
        BilinearTap b{};
        const double fy = std::floor(py);
        const double fx = std::floor(px);
        b.ly = py - fy;
        b.lx = px - fx;
        // Coordinates far outside the plane are clamped before the integer
        // conversion; all four corners are then invalid anyway.
        const double lim = 1e9;
        b.y0 = static_cast<std::ptrdiff_t>(fy < -lim ? -lim : (fy > lim ? lim : fy));
        b.x0 = static_cast<std::ptrdiff_t>(fx < -lim ? -lim : (fx > lim ? lim : fx));
        const bool y0_in = b.y0 >= 0 && b.y0 < h;
        const bool y1_in = b.y0 + 1 >= 0 && b.y0 + 1 < h;
        const bool x0_in = b.x0 >= 0 && b.x0 < w;
        const bool x1_in = b.x0 + 1 >= 0 && b.x0 + 1 < w;
        b.in00 = y0_in && x0_in;
        b.in01 = y0_in && x1_in;
        b.in10 = y1_in && x0_in;
        b.in11 = y1_in && x1_in;
        return b;
    }

    bool any() const noexcept { return in00 || in01 || in10 || in11; }

    struct Corners {
        double v00, v01, v10, v11;
    };

    Corners read(const double* plane, std::ptrdiff_t w) const noexcept {
        const std::ptrdiff_t i00 = y0 * w + x0;
        return {in00 ? plane[i00] : 0.0, in01 ? plane[i00 + 1] : 0.0,
                in10 ? plane[i00 + w] : 0.0, in11 ? plane[i00 + w + 1] : 0.0};
    }

    /// Adds weight * (bilinear corner weights) onto the valid corners.
    void scatter(double* plane, std::ptrdiff_t w, double weight) const noexcept {
        const std::ptrdiff_t i00 = y0 * w + x0;
        if (in00) plane[i00] += weight * (1.0 - ly) * (1.0 - lx);
        if (in01) plane[i00 + 1] += weight * (1.0 - ly) * lx;
        if (in10) plane[i00 + w] += weight * ly * (1.0 - lx);
        if (in11) plane[i00 + w + 1] += weight * ly * lx;
    }

    double sample(const Corners& c) const noexcept {
        return (1.0 - ly) * ((1.0 - lx) * c.v00 + lx * c.v01) +
               ly * ((1.0 - lx) * c.v10 + lx * c.v11);
    }
    double d_dy(const Corners& c) const noexcept {
        return (1.0 - lx) * (c.v10 - c.v00) + lx * (c.v11 - c.v01);
    }
    double d_dx(const Corners& c) const noexcept {
        return (1.0 - ly) * (c.v01 - c.v00) + ly * (c.v11 - c.v10);
    }
};

}  // namespace camo::detail
