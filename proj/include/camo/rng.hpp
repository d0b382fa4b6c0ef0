#pragma once

#include <cstdint>
#include <string_view>

namespace camo {

/// Counter-based generator: the i-th draw (i = 1, 2, ...) of a stream with
/// key k is splitmix64(k + i * 0x9E3779B97F4A7C15), where splitmix64 is
///
///   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
///   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
///   z =  z ^ (z >> 31)
///
/// Uniforms take the top 53 bits. Normals use Box-Muller on consecutive
/// uniform pairs (u1 in (0, 1], u2 in [0, 1)) and emit the cosine branch
/// first, then the sine branch.
class Rng {
public:
    static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

    explicit Rng(std::uint64_t key) noexcept : key_(key) {}

    /// Named sub-stream of a root seed: key = mix(root ^ fnv1a64(name)).
    static Rng stream(std::uint64_t root, std::string_view name) noexcept;

    static std::uint64_t mix(std::uint64_t z) noexcept;
    static std::uint64_t fnv1a64(std::string_view s) noexcept;

    std::uint64_t next_u64() noexcept {
        ++counter_;
        return mix(key_ + counter_ * kGamma);
    }
    /// [0, 1)
    double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
    /// [lo, hi)
    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
    /// Integer in [0, bound).
    std::uint64_t below(std::uint64_t bound) noexcept;
    double normal() noexcept;

    std::uint64_t key() const noexcept { return key_; }
    std::uint64_t counter() const noexcept { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace camo
