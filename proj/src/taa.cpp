#include "camo/taa.hpp"

#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "bilinear.hpp"
#include "camo/error.hpp"

namespace camo {

using detail::BilinearTap;

std::vector<GridPoint> base_grid(std::size_t k_pts) {
    const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(k_pts))));
    if (k_pts == 0 || side * side != k_pts || side % 2 == 0) {
        throw std::invalid_argument(
            fmt::format("k_pts must be an odd perfect square (1, 9, 25, ...), got {}", k_pts));
    }
    const auto half = static_cast<double>(side / 2);
    std::vector<GridPoint> grid;
    grid.reserve(k_pts);
    for (std::size_t i = 0; i < side; ++i) {
        for (std::size_t j = 0; j < side; ++j) {
            grid.push_back({static_cast<double>(i) - half, static_cast<double>(j) - half});
        }
    }
    return grid;
}

TaaSpec make_taa_spec(std::size_t channels, std::size_t k_pts, Rng& rng) {
    if (channels == 0) throw std::invalid_argument("TAA needs at least one channel");
    base_grid(k_pts);
    auto kernel = [&](std::size_t c_out) {
        Tensor5 w({c_out, channels, 3, 3, 3});
        const double scale = 1.0 / std::sqrt(static_cast<double>(channels * 27));
        for (double& v : w.data()) v = rng.normal() * scale;
        return make_conv_spec(std::move(w), 0.0);
    };
    TaaSpec spec;
    spec.k_pts = k_pts;
    spec.phi_off = kernel(2 * k_pts);
    spec.off_bias.assign(2 * k_pts, 0.0);
    spec.phi_mod = kernel(1);
    spec.fuse_weights = Matrix(channels, channels);
    const double scale = 1.0 / std::sqrt(static_cast<double>(channels));
    for (double& v : spec.fuse_weights.data) v = rng.normal() * scale;
    spec.fuse_bias.assign(channels, 0.0);
    return spec;
}

void validate_taa(const TaaSpec& spec) {
    base_grid(spec.k_pts);
    if (spec.phi_off.theta != 0.0 || spec.phi_mod.theta != 0.0) {
        throw std::invalid_argument("phi_off and phi_mod are plain convolutions (theta = 0)");
    }
    if (spec.phi_off.c_out() != 2 * spec.k_pts || spec.off_bias.size() != 2 * spec.k_pts) {
        throw ShapeError(fmt::format("phi_off must emit 2 * k_pts = {} channels", 2 * spec.k_pts));
    }
    if (spec.phi_mod.c_out() != 1) throw ShapeError("phi_mod must emit one channel");
    const std::size_t c = spec.fuse_weights.rows;
    if (spec.fuse_weights.cols != c || spec.fuse_bias.size() != c) {
        throw ShapeError("fusion projection must be C x C with a C-vector bias");
    }
}

namespace {

double sigmoid(double v) noexcept {
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
}

void require_frame_geometry(const Shape5& f, const Shape5& g, const char* what) {
    if (f.n != g.n || f.t != g.t || f.h != g.h || f.w != g.w) {
        throw ShapeError(fmt::format("{}: geometry {} does not match features {}", what, g.str(),
                                     f.str()));
    }
}

Tensor5 same_geometry_conv(const Tensor5& x, const ConvSpec3D& spec, const char* name) {
    Tensor5 y = conv3d(x, spec);
    require_frame_geometry(x.shape(), y.shape(), name);
    return y;
}

void check_offsets(const Shape5& fs, const OffsetField& offsets, std::size_t k_pts) {
    const Shape5 os = offsets.values.shape();
    if (os.c != 2 * k_pts) {
        throw ShapeError(
            fmt::format("offset field has {} channels, expected 2 * k_pts = {}", os.c, 2 * k_pts));
    }
    require_frame_geometry(fs, os, "offset field");
}

}  // namespace

Trajectory predict_trajectory(const Tensor5& f_t, const TaaSpec& spec) {
    validate_taa(spec);
    if (f_t.shape().c != spec.phi_off.c_in() || f_t.shape().c != spec.phi_mod.c_in()) {
        throw ShapeError(fmt::format("F_t has {} channels; phi expects {}", f_t.shape().c,
                                     spec.phi_off.c_in()));
    }
    Trajectory out;
    out.offsets.values = same_geometry_conv(f_t, spec.phi_off, "phi_off");
    Tensor5& off = out.offsets.values;
    const Shape5 os = off.shape();
    for (std::size_t n = 0; n < os.n; ++n)
        for (std::size_t c = 0; c < os.c; ++c)
            for (std::size_t t = 0; t < os.t; ++t)
                for (double& v : off.plane(n, c, t)) v += spec.off_bias[c];

    out.mask.values = same_geometry_conv(f_t, spec.phi_mod, "phi_mod");
    for (double& v : out.mask.values.data()) v = sigmoid(v + spec.mod_bias);
    return out;
}

Tensor5 deform_sample(const Tensor5& f_s, const OffsetField& offsets, std::size_t k_pts) {
    const auto grid = base_grid(k_pts);
    check_offsets(f_s.shape(), offsets, k_pts);
    const Shape5 s = f_s.shape();
    Tensor5 out(s);
    if (out.empty()) return out;

    const auto h = static_cast<std::ptrdiff_t>(s.h);
    const auto w = static_cast<std::ptrdiff_t>(s.w);
    const auto frames = static_cast<std::ptrdiff_t>(s.n * s.t);
    const double inv_k = 1.0 / static_cast<double>(k_pts);

    // Each (n, t) frame is one task; per element the k_pts samples are summed
    // in stencil order.
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t nt = 0; nt < frames; ++nt) {
        const std::size_t n = static_cast<std::size_t>(nt) / s.t;
        const std::size_t t = static_cast<std::size_t>(nt) % s.t;
        for (std::ptrdiff_t y = 0; y < h; ++y) {
            for (std::ptrdiff_t x = 0; x < w; ++x) {
                const std::size_t pix = static_cast<std::size_t>(y * w + x);
                for (std::size_t j = 0; j < k_pts; ++j) {
                    const double dy = offsets.values.plane(n, 2 * j, t)[pix];
                    const double dx = offsets.values.plane(n, 2 * j + 1, t)[pix];
                    const BilinearTap tap = BilinearTap::at(static_cast<double>(y) + grid[j].dy + dy,
                                                            static_cast<double>(x) + grid[j].dx + dx, h, w);
                    if (!tap.any()) continue;
                    for (std::size_t c = 0; c < s.c; ++c) {
                        out.plane(n, c, t)[pix] += tap.sample(tap.read(f_s.plane(n, c, t).data(), w));
                    }
                }
                if (k_pts != 1) {
                    for (std::size_t c = 0; c < s.c; ++c) out.plane(n, c, t)[pix] *= inv_k;
                }
            }
        }
    }
    return out;
}

DeformGrads deform_sample_backward(const Tensor5& f_s, const OffsetField& offsets,
                                   const Tensor5& grad_out) {
    const std::size_t k_pts = offsets.k_pts();
    const auto grid = base_grid(k_pts);
    check_offsets(f_s.shape(), offsets, k_pts);
    if (grad_out.shape() != f_s.shape()) {
        throw ShapeError(fmt::format("grad_out extents {} differ from sampled output {}",
                                     grad_out.shape().str(), f_s.shape().str()));
    }
    const Shape5 s = f_s.shape();
    DeformGrads out{Tensor5(s), Tensor5(offsets.values.shape())};
    if (f_s.empty()) return out;

    const auto h = static_cast<std::ptrdiff_t>(s.h);
    const auto w = static_cast<std::ptrdiff_t>(s.w);
    const auto frames = static_cast<std::ptrdiff_t>(s.n * s.t);
    const double inv_k = 1.0 / static_cast<double>(k_pts);

    // Samples never cross frames, so a frame task owns grad_fs[n, :, t] and
    // grad_off[n, :, t] outright; no reduction between tasks is needed.
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t nt = 0; nt < frames; ++nt) {
        const std::size_t n = static_cast<std::size_t>(nt) / s.t;
        const std::size_t t = static_cast<std::size_t>(nt) % s.t;
        for (std::ptrdiff_t y = 0; y < h; ++y) {
            for (std::ptrdiff_t x = 0; x < w; ++x) {
                const std::size_t pix = static_cast<std::size_t>(y * w + x);
                for (std::size_t j = 0; j < k_pts; ++j) {
                    const double dy = offsets.values.plane(n, 2 * j, t)[pix];
                    const double dx = offsets.values.plane(n, 2 * j + 1, t)[pix];
                    const BilinearTap tap = BilinearTap::at(static_cast<double>(y) + grid[j].dy + dy,
                                                            static_cast<double>(x) + grid[j].dx + dx, h, w);
                    if (!tap.any()) continue;
                    double g_dy = 0.0;
                    double g_dx = 0.0;
                    for (std::size_t c = 0; c < s.c; ++c) {
                        const double g = grad_out.plane(n, c, t)[pix] * inv_k;
                        const auto corners = tap.read(f_s.plane(n, c, t).data(), w);
                        g_dy += g * tap.d_dy(corners);
                        g_dx += g * tap.d_dx(corners);
                        tap.scatter(out.grad_fs.plane(n, c, t).data(), w, g);
                    }
                    out.grad_off.plane(n, 2 * j, t)[pix] = g_dy;
                    out.grad_off.plane(n, 2 * j + 1, t)[pix] = g_dx;
                }
            }
        }
    }
    return out;
}

Tensor5 modulate_and_fuse(const Tensor5& f_t, const Tensor5& sampled, const ModulationMask& mask,
                          const Matrix& fuse_weights, const std::vector<double>& fuse_bias) {
    const Shape5 s = f_t.shape();
    if (sampled.shape() != s) {
        throw ShapeError(fmt::format("sampled features {} differ from F_t {}",
                                     sampled.shape().str(), s.str()));
    }
    if (mask.values.shape().c != 1) throw ShapeError("modulation mask must have one channel");
    require_frame_geometry(s, mask.values.shape(), "modulation mask");
    if (fuse_weights.rows != s.c || fuse_weights.cols != s.c || fuse_bias.size() != s.c) {
        throw ShapeError(fmt::format("fusion projection must be {0} x {0} with bias {0}", s.c));
    }

    Tensor5 out = f_t;
    const auto frames = static_cast<std::ptrdiff_t>(s.n * s.t);
    const std::size_t hw = s.h * s.w;
#pragma omp parallel
    {
        std::vector<double> z(s.c);
#pragma omp for schedule(static)
        for (std::ptrdiff_t nt = 0; nt < frames; ++nt) {
            const std::size_t n = static_cast<std::size_t>(nt) / s.t;
            const std::size_t t = static_cast<std::size_t>(nt) % s.t;
            const auto m = mask.values.plane(n, 0, t);
            for (std::size_t p = 0; p < hw; ++p) {
                for (std::size_t c = 0; c < s.c; ++c) z[c] = sampled.plane(n, c, t)[p] * m[p];
                for (std::size_t c = 0; c < s.c; ++c) {
                    double acc = 0.0;
                    const auto wrow = fuse_weights.row(c);
                    for (std::size_t k = 0; k < s.c; ++k) acc += wrow[k] * z[k];
                    out.plane(n, c, t)[p] += acc + fuse_bias[c];
                }
            }
        }
    }
    return out;
}

Tensor5 taa_fuse(const Tensor5& f_t, const Tensor5& f_s, const TaaSpec& spec) {
    if (f_t.shape() != f_s.shape()) {
        throw ShapeError(
            fmt::format("F_t {} and F_s {} must share extents", f_t.shape().str(), f_s.shape().str()));
    }
    const Trajectory traj = predict_trajectory(f_t, spec);
    const Tensor5 sampled = deform_sample(f_s, traj.offsets, spec.k_pts);
    return modulate_and_fuse(f_t, sampled, traj.mask, spec.fuse_weights, spec.fuse_bias);
}

}  // namespace camo
