#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace camo {

struct GrayImage {
    std::size_t h = 0;
    std::size_t w = 0;
    std::vector<std::uint8_t> pixels;  // row-major
};

/// Reads a PNG as 8-bit grayscale. Palette, RGB and 16-bit inputs are
/// converted; alpha is dropped.
GrayImage read_gray8(const std::filesystem::path& path);

void write_gray8(const std::filesystem::path& path, const GrayImage& img);
void write_gray16(const std::filesystem::path& path, std::size_t h, std::size_t w,
                  std::span<const std::uint16_t> pixels);
/// pixels holds h * w * 3 interleaved RGB bytes.
void write_rgb8(const std::filesystem::path& path, std::size_t h, std::size_t w,
                std::span<const std::uint8_t> pixels);

}  // namespace camo
