#pragma once

// Trajectory-aware alignment: offsets and a confidence mask are regressed from
// the temporal stream, the spatial stream is bilinearly sampled on the
// deformed grid, modulated, projected and added back residually:
//
//   offsets = phi_off(F_t),  mask = sigmoid(phi_mod(F_t))
//   F_out   = F_t + Linear(S(F_s, G + offsets) * mask)

#include <cstddef>
#include <vector>

#include "camo/cdc3d.hpp"
#include "camo/matrix.hpp"
#include "camo/rng.hpp"
#include "camo/tensor.hpp"

namespace camo {

inline constexpr std::size_t kDefaultSamplingPoints = 9;

struct GridPoint {
    double dy;
    double dx;
};

/// Base stencil: a side x side unit-spaced square centred on the output
/// location, row-major. k_pts must be an odd perfect square (1, 9, 25, ...).
std::vector<GridPoint> base_grid(std::size_t k_pts);

/// (N, 2 * k_pts, T, H, W) pixel offsets; channel 2j is dy and 2j + 1 is dx
/// of sampling point j.
struct OffsetField {
    Tensor5 values;
    std::size_t k_pts() const noexcept { return values.shape().c / 2; }
};

/// (N, 1, T, H, W) confidence in [0, 1].
struct ModulationMask {
    Tensor5 values;
};

struct TaaSpec {
    ConvSpec3D phi_off;             // plain conv (theta = 0), C -> 2 * k_pts
    std::vector<double> off_bias;   // 2 * k_pts
    ConvSpec3D phi_mod;             // plain conv (theta = 0), C -> 1
    double mod_bias = 0.0;
    Matrix fuse_weights;            // C x C; out_c = sum_c' W(c, c') z_c' + b_c
    std::vector<double> fuse_bias;  // C
    std::size_t k_pts = kDefaultSamplingPoints;

    std::size_t channels() const noexcept { return fuse_weights.rows; }
};

/// Random TAA parameters: 3x3x3 phi kernels, weights ~ N(0, 1/fan_in), zero biases.
TaaSpec make_taa_spec(std::size_t channels, std::size_t k_pts, Rng& rng);

void validate_taa(const TaaSpec& spec);

struct Trajectory {
    OffsetField offsets;
    ModulationMask mask;
};

Trajectory predict_trajectory(const Tensor5& f_t, const TaaSpec& spec);

/// Mean over the k_pts bilinear samples of f_s at p + g_j + offset_j, per
/// channel. Samples are taken within each frame; corners outside the plane
/// read zero.
Tensor5 deform_sample(const Tensor5& f_s, const OffsetField& offsets, std::size_t k_pts);

/// F_t + W * (sampled * mask) + b at every location.
Tensor5 modulate_and_fuse(const Tensor5& f_t, const Tensor5& sampled, const ModulationMask& mask,
                          const Matrix& fuse_weights, const std::vector<double>& fuse_bias);

Tensor5 taa_fuse(const Tensor5& f_t, const Tensor5& f_s, const TaaSpec& spec);

struct DeformGrads {
    Tensor5 grad_fs;
    Tensor5 grad_off;
};

/// Adjoint of deform_sample. The offset derivative of the bilinear kernel is
/// taken one-sided from the right where a coordinate is an exact integer.
DeformGrads deform_sample_backward(const Tensor5& f_s, const OffsetField& offsets,
                                   const Tensor5& grad_out);

namespace serial {

Tensor5 deform_sample(const Tensor5& f_s, const OffsetField& offsets, std::size_t k_pts);
DeformGrads deform_sample_backward(const Tensor5& f_s, const OffsetField& offsets,
                                   const Tensor5& grad_out);

}  // namespace serial

}  // namespace camo
