#include "camo/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include <fmt/format.h>

#include "camo/error.hpp"

namespace camo {

namespace {

void put_u64(std::ostream& os, std::uint64_t v) {
    unsigned char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(bytes), 8);
}

std::uint64_t get_u64(std::istream& is) {
    unsigned char bytes[8];
    if (!is.read(reinterpret_cast<char*>(bytes), 8)) throw SchemaError("tensor dump truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    return v;
}

}  // namespace

void write_tensor(std::ostream& os, const Tensor5& x) {
    os.write(kTensorMagic, sizeof kTensorMagic);
    for (std::size_t e : x.shape().as_array()) put_u64(os, e);
    for (double v : x.data()) put_u64(os, std::bit_cast<std::uint64_t>(v));
    if (!os) throw std::runtime_error("failed writing tensor dump");
}

Tensor5 read_tensor(std::istream& is) {
    char magic[8];
    if (!is.read(magic, 8) || std::memcmp(magic, kTensorMagic, 8) != 0) {
        throw SchemaError("not a CST5TENS tensor dump");
    }
    Shape5 s{};
    s.n = get_u64(is);
    s.c = get_u64(is);
    s.t = get_u64(is);
    s.h = get_u64(is);
    s.w = get_u64(is);
    std::vector<double> data(s.numel());
    for (double& v : data) v = std::bit_cast<double>(get_u64(is));
    return Tensor5(s, std::move(data));
}

void save_tensor(const std::filesystem::path& path, const Tensor5& x) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error(fmt::format("cannot open {} for writing", path.string()));
    write_tensor(os, x);
}

Tensor5 load_tensor(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw MissingDataError(fmt::format("cannot open tensor dump {}", path.string()),
                               {path.string()});
    }
    return read_tensor(is);
}

}  // namespace camo
