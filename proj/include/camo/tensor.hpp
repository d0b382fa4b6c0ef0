#pragma once

#include <array>
#include <cassert>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace camo {

/// Extents of a rank-5 (N, C, T, H, W) tensor.
struct Shape5 {
    std::size_t n = 0;
    std::size_t c = 0;
    std::size_t t = 0;
    std::size_t h = 0;
    std::size_t w = 0;

    /// Number of elements. Throws std::length_error when the product
    /// overflows or exceeds what a std::vector<double> can hold.
    std::size_t numel() const;

    std::array<std::size_t, 5> as_array() const { return {n, c, t, h, w}; }
    std::string str() const;

    friend bool operator==(const Shape5&, const Shape5&) = default;
};

using Index5 = std::array<std::size_t, 5>;

/// Dense rank-5 tensor of doubles in fixed row-major (N, C, T, H, W) order.
class Tensor5 {
public:
    Tensor5() = default;
    explicit Tensor5(Shape5 shape);
    Tensor5(Shape5 shape, std::vector<double> data);

    const Shape5& shape() const noexcept { return shape_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    const std::vector<double>& buffer() const noexcept { return data_; }

    std::size_t index(std::size_t n, std::size_t c, std::size_t t, std::size_t h,
                      std::size_t w) const noexcept {
        assert(n < shape_.n && c < shape_.c && t < shape_.t && h < shape_.h && w < shape_.w);
        return (((n * shape_.c + c) * shape_.t + t) * shape_.h + h) * shape_.w + w;
    }
    std::size_t index(const Index5& i) const noexcept { return index(i[0], i[1], i[2], i[3], i[4]); }
    Index5 unindex(std::size_t linear) const noexcept;

    double& at(std::size_t n, std::size_t c, std::size_t t, std::size_t h, std::size_t w) noexcept {
        return data_[index(n, c, t, h, w)];
    }
    double at(std::size_t n, std::size_t c, std::size_t t, std::size_t h,
              std::size_t w) const noexcept {
        return data_[index(n, c, t, h, w)];
    }
    double& operator[](std::size_t i) noexcept {
        assert(i < data_.size());
        return data_[i];
    }
    double operator[](std::size_t i) const noexcept {
        assert(i < data_.size());
        return data_[i];
    }

    /// One H x W plane.
    std::span<double> plane(std::size_t n, std::size_t c, std::size_t t) noexcept;
    std::span<const double> plane(std::size_t n, std::size_t c, std::size_t t) const noexcept;

    Tensor5& operator+=(const Tensor5& other);
    Tensor5& operator-=(const Tensor5& other);
    Tensor5& operator*=(const Tensor5& other);
    Tensor5& operator*=(double s);

    /// this += alpha * other
    Tensor5& axpy(double alpha, const Tensor5& other);

    double min() const;
    double max() const;
    /// Serial left-to-right sum; the order is fixed so results are reproducible.
    double sum() const noexcept;
    bool all_finite() const noexcept;

    /// Same extents and element-wise equal values.
    friend bool operator==(const Tensor5&, const Tensor5&) = default;

private:
    Shape5 shape_{};
    std::vector<double> data_;
};

Tensor5 operator+(Tensor5 a, const Tensor5& b);
Tensor5 operator-(Tensor5 a, const Tensor5& b);
Tensor5 operator*(Tensor5 a, const Tensor5& b);
Tensor5 operator*(Tensor5 a, double s);

double max_abs_diff(const Tensor5& a, const Tensor5& b);

Tensor5 zeros(Shape5 shape);
Tensor5 full(Shape5 shape, double value);

/// i.i.d. N(0, 1) samples from the portable counter-based generator in rng.hpp.
Tensor5 gaussian_init(Shape5 shape, std::uint64_t seed);

/// Bilinear spatial resize with the align-corners-false convention:
/// src = (dst + 0.5) / scale - 0.5, clamped to the edge. Output H, W are
/// round(scale * H), round(scale * W).
Tensor5 resize_bilinear_spatial(const Tensor5& x, double scale);

/// Same sampling convention, but with explicit output extents; the per-axis
/// scale is out / in.
Tensor5 resize_bilinear_to(const Tensor5& x, std::size_t out_h, std::size_t out_w);

}  // namespace camo
