#include "camo/image_io.hpp"

#include <png.h>

#include <cstdio>
#include <memory>
#include <stdexcept>

#include <fmt/format.h>

#include "camo/error.hpp"

namespace camo {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const noexcept {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// libpng reports errors through longjmp; the message is parked here first.
// Only trivially destructible locals live between setjmp and the libpng calls.
struct PngError {
    char message[256] = "libpng error";
};

void png_fail(png_structp png, png_const_charp msg) {
    auto* err = static_cast<PngError*>(png_get_error_ptr(png));
    std::snprintf(err->message, sizeof err->message, "%s", msg);
    png_longjmp(png, 1);
}
void png_warn(png_structp, png_const_charp) {}

void write_png(const std::filesystem::path& path, std::size_t h, std::size_t w, int color_type,
               int bit_depth, const std::vector<png_bytep>& rows) {
    FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) throw std::runtime_error(fmt::format("cannot open {} for writing", path.string()));
    PngError err;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, png_fail, png_warn);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error(fmt::format("{}: {}", path.string(), err.message));
    }
    png_init_io(png, f.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), bit_depth,
                 color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    // No tIME chunk: identical pixels give identical files.
    png_write_info(png, info);
    png_write_image(png, const_cast<png_bytepp>(rows.data()));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

struct ReadHeader {
    png_uint_32 h = 0;
    png_uint_32 w = 0;
    std::size_t rowbytes = 0;
};

// Sets up the grayscale transforms and reads the header; false on a libpng error.
bool read_png_header(png_structp png, png_infop info, std::FILE* f, ReadHeader* out) {
    if (setjmp(png_jmpbuf(png))) return false;
    png_init_io(png, f);
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);
    const png_byte color = png_get_color_type(png, info);
    const png_byte depth = png_get_bit_depth(png, info);
    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA ||
        color == PNG_COLOR_TYPE_PALETTE) {
        png_set_rgb_to_gray_fixed(png, 1, -1, -1);
    }
    png_read_update_info(png, info);
    out->h = png_get_image_height(png, info);
    out->w = png_get_image_width(png, info);
    out->rowbytes = png_get_rowbytes(png, info);
    return true;
}

bool read_png_rows(png_structp png, png_bytepp rows) {
    if (setjmp(png_jmpbuf(png))) return false;
    png_read_image(png, rows);
    png_read_end(png, nullptr);
    return true;
}

}  // namespace

GrayImage read_gray8(const std::filesystem::path& path) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) throw MissingDataError(fmt::format("cannot open image {}", path.string()), {path.string()});
    png_byte sig[8];
    if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
        throw SchemaError(fmt::format("{} is not a PNG file", path.string()));
    }
    PngError err;
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, png_fail, png_warn);
    png_infop info = png_create_info_struct(png);
    auto fail = [&](const char* why) {
        png_destroy_read_struct(&png, &info, nullptr);
        return SchemaError(fmt::format("{}: {}", path.string(), why));
    };
    ReadHeader hdr;
    if (!read_png_header(png, info, f.get(), &hdr)) throw fail(err.message);
    if (hdr.rowbytes != hdr.w) throw fail("unexpected row layout after grayscale conversion");
    GrayImage img;
    img.h = hdr.h;
    img.w = hdr.w;
    img.pixels.resize(img.h * img.w);
    std::vector<png_bytep> rows(img.h);
    for (std::size_t y = 0; y < img.h; ++y) rows[y] = img.pixels.data() + y * img.w;
    if (!read_png_rows(png, rows.data())) throw fail(err.message);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

void write_gray8(const std::filesystem::path& path, const GrayImage& img) {
    if (img.pixels.size() != img.h * img.w) throw ShapeError("gray image buffer size mismatch");
    std::vector<png_bytep> rows(img.h);
    for (std::size_t y = 0; y < img.h; ++y) {
        rows[y] = const_cast<png_bytep>(img.pixels.data() + y * img.w);
    }
    write_png(path, img.h, img.w, PNG_COLOR_TYPE_GRAY, 8, rows);
}

void write_gray16(const std::filesystem::path& path, std::size_t h, std::size_t w,
                  std::span<const std::uint16_t> pixels) {
    if (pixels.size() != h * w) throw ShapeError("16-bit image buffer size mismatch");
    // PNG stores 16-bit samples big-endian; serialize explicitly.
    std::vector<std::uint8_t> bytes(h * w * 2);
    for (std::size_t i = 0; i < pixels.size(); ++i) {
        bytes[2 * i] = static_cast<std::uint8_t>(pixels[i] >> 8);
        bytes[2 * i + 1] = static_cast<std::uint8_t>(pixels[i] & 0xFF);
    }
    std::vector<png_bytep> rows(h);
    for (std::size_t y = 0; y < h; ++y) rows[y] = bytes.data() + y * w * 2;
    write_png(path, h, w, PNG_COLOR_TYPE_GRAY, 16, rows);
}

void write_rgb8(const std::filesystem::path& path, std::size_t h, std::size_t w,
                std::span<const std::uint8_t> pixels) {
    if (pixels.size() != h * w * 3) throw ShapeError("RGB image buffer size mismatch");
    std::vector<png_bytep> rows(h);
    for (std::size_t y = 0; y < h; ++y) rows[y] = const_cast<png_bytep>(pixels.data() + y * w * 3);
    write_png(path, h, w, PNG_COLOR_TYPE_RGB, 8, rows);
}

}  // namespace camo
