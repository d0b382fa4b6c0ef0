#include "camo/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <fmt/format.h>

#include "camo/error.hpp"
#include "camo/rng.hpp"

namespace camo {

std::size_t Shape5::numel() const {
    constexpr std::size_t kMax = std::numeric_limits<std::ptrdiff_t>::max() / sizeof(double);
    std::size_t total = 1;
    for (std::size_t e : as_array()) {
        if (e == 0) return 0;
    }
    for (std::size_t e : as_array()) {
        if (total > kMax / e) {
            throw std::length_error(fmt::format("tensor extents {} exceed addressable capacity", str()));
        }
        total *= e;
    }
    return total;
}

std::string Shape5::str() const { return fmt::format("({},{},{},{},{})", n, c, t, h, w); }

Tensor5::Tensor5(Shape5 shape) : shape_(shape), data_(shape.numel(), 0.0) {}

Tensor5::Tensor5(Shape5 shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
    if (data_.size() != shape_.numel()) {
        throw ShapeError(fmt::format("buffer of length {} does not match extents {}", data_.size(),
                                     shape_.str()));
    }
}

Index5 Tensor5::unindex(std::size_t linear) const noexcept {
    Index5 out{};
    const auto dims = shape_.as_array();
    for (int axis = 4; axis >= 0; --axis) {
        out[axis] = linear % dims[axis];
        linear /= dims[axis];
    }
    return out;
}

std::span<double> Tensor5::plane(std::size_t n, std::size_t c, std::size_t t) noexcept {
    const std::size_t hw = shape_.h * shape_.w;
    return std::span<double>(data_).subspan(((n * shape_.c + c) * shape_.t + t) * hw, hw);
}

std::span<const double> Tensor5::plane(std::size_t n, std::size_t c, std::size_t t) const noexcept {
    const std::size_t hw = shape_.h * shape_.w;
    return std::span<const double>(data_).subspan(((n * shape_.c + c) * shape_.t + t) * hw, hw);
}

namespace {

void require_same(const Tensor5& a, const Tensor5& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(fmt::format("{}: extents {} vs {}", op, a.shape().str(), b.shape().str()));
    }
}

}  // namespace

Tensor5& Tensor5::operator+=(const Tensor5& other) {
    require_same(*this, other, "add");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

Tensor5& Tensor5::operator-=(const Tensor5& other) {
    require_same(*this, other, "sub");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
    return *this;
}

Tensor5& Tensor5::operator*=(const Tensor5& other) {
    require_same(*this, other, "mul");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] *= other.data_[i];
    return *this;
}

Tensor5& Tensor5::operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
}

Tensor5& Tensor5::axpy(double alpha, const Tensor5& other) {
    require_same(*this, other, "axpy");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += alpha * other.data_[i];
    return *this;
}

double Tensor5::min() const {
    if (data_.empty()) throw std::domain_error("min of an empty tensor");
    return *std::min_element(data_.begin(), data_.end());
}

double Tensor5::max() const {
    if (data_.empty()) throw std::domain_error("max of an empty tensor");
    return *std::max_element(data_.begin(), data_.end());
}

double Tensor5::sum() const noexcept {
    double s = 0.0;
    for (double v : data_) s += v;
    return s;
}

bool Tensor5::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor5 operator+(Tensor5 a, const Tensor5& b) { return a += b; }
Tensor5 operator-(Tensor5 a, const Tensor5& b) { return a -= b; }
Tensor5 operator*(Tensor5 a, const Tensor5& b) { return a *= b; }
Tensor5 operator*(Tensor5 a, double s) { return a *= s; }

double max_abs_diff(const Tensor5& a, const Tensor5& b) {
    require_same(a, b, "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

Tensor5 zeros(Shape5 shape) { return Tensor5(shape); }

Tensor5 full(Shape5 shape, double value) {
    return Tensor5(shape, std::vector<double>(shape.numel(), value));
}

Tensor5 gaussian_init(Shape5 shape, std::uint64_t seed) {
    Tensor5 out(shape);
    Rng rng(seed);
    for (double& v : out.data()) v = rng.normal();
    return out;
}

namespace {

struct AxisTap {
    std::size_t lo;
    std::size_t hi;
    double frac;  // weight of hi
};

// src = (dst + 0.5) * inv_scale - 0.5, clamped into [0, in - 1].
std::vector<AxisTap> axis_taps(std::size_t in, std::size_t out, double inv_scale) {
    std::vector<AxisTap> taps(out);
    const double last = static_cast<double>(in - 1);
    for (std::size_t d = 0; d < out; ++d) {
        double src = (static_cast<double>(d) + 0.5) * inv_scale - 0.5;
        src = std::clamp(src, 0.0, last);
        const auto lo = static_cast<std::size_t>(std::floor(src));
        const std::size_t hi = std::min(lo + 1, in - 1);
        taps[d] = {lo, hi, src - static_cast<double>(lo)};
    }
    return taps;
}

Tensor5 resize_impl(const Tensor5& x, std::size_t out_h, std::size_t out_w, double inv_sh,
                    double inv_sw) {
    const Shape5 s = x.shape();
    Tensor5 out({s.n, s.c, s.t, out_h, out_w});
    if (out.empty() || x.empty()) return out;
    const auto ty = axis_taps(s.h, out_h, inv_sh);
    const auto tx = axis_taps(s.w, out_w, inv_sw);
    for (std::size_t n = 0; n < s.n; ++n) {
        for (std::size_t c = 0; c < s.c; ++c) {
            for (std::size_t t = 0; t < s.t; ++t) {
                const auto src = x.plane(n, c, t);
                auto dst = out.plane(n, c, t);
                for (std::size_t i = 0; i < out_h; ++i) {
                    const AxisTap& a = ty[i];
                    const double* r0 = src.data() + a.lo * s.w;
                    const double* r1 = src.data() + a.hi * s.w;
                    for (std::size_t j = 0; j < out_w; ++j) {
                        const AxisTap& b = tx[j];
                        // std::lerp is bounded for frac in [0, 1], so the output
                        // never leaves the input's min/max envelope.
                        const double top = std::lerp(r0[b.lo], r0[b.hi], b.frac);
                        const double bot = std::lerp(r1[b.lo], r1[b.hi], b.frac);
                        dst[i * out_w + j] = std::lerp(top, bot, a.frac);
                    }
                }
            }
        }
    }
    return out;
}

}  // namespace

Tensor5 resize_bilinear_spatial(const Tensor5& x, double scale) {
    if (!(scale > 0.0) || !std::isfinite(scale)) {
        throw std::invalid_argument(fmt::format("resize scale must be positive, got {}", scale));
    }
    const Shape5 s = x.shape();
    if (s.h < 1 || s.w < 1) throw ShapeError("resize needs H, W >= 1");
    const auto out_h = static_cast<std::size_t>(std::llround(scale * static_cast<double>(s.h)));
    const auto out_w = static_cast<std::size_t>(std::llround(scale * static_cast<double>(s.w)));
    if (scale == 1.0) return x;
    return resize_impl(x, out_h, out_w, 1.0 / scale, 1.0 / scale);
}

Tensor5 resize_bilinear_to(const Tensor5& x, std::size_t out_h, std::size_t out_w) {
    const Shape5 s = x.shape();
    if (s.h < 1 || s.w < 1) throw ShapeError("resize needs H, W >= 1");
    if (out_h == s.h && out_w == s.w) return x;
    return resize_impl(x, out_h, out_w, static_cast<double>(s.h) / static_cast<double>(out_h),
                       static_cast<double>(s.w) / static_cast<double>(out_w));
}

}  // namespace camo
