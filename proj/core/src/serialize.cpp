#include "dst/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace dst {

namespace {

constexpr char kMagic[4] = {'D', 'S', 'T', 'B'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ostream& os, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(os, bits);
}

std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

std::uint64_t get_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

double get_f64(std::istream& is) {
    std::uint64_t bits = get_u64(is);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

}  // namespace

void save_bundle(const std::string& path, const TensorBundle& tensors) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_bundle: cannot open " + path);
    os.write(kMagic, 4);
    put_u32(os, kVersion);
    put_u64(os, tensors.size());
    for (const auto& [name, tensor] : tensors) {
        put_u32(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        put_u32(os, static_cast<std::uint32_t>(tensor.rank()));
        for (std::size_t d : tensor.shape()) put_u64(os, d);
        for (double v : tensor.data()) put_f64(os, v);
    }
    if (!os) throw std::runtime_error("save_bundle: write failed for " + path);
}

TensorBundle load_bundle(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_bundle: cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("load_bundle: bad magic in " + path);
    std::uint32_t version = get_u32(is);
    if (version != kVersion)
        throw std::runtime_error("load_bundle: unsupported version in " + path);
    std::uint64_t count = get_u64(is);

    TensorBundle out;
    out.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        std::uint32_t name_len = get_u32(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        std::uint32_t rank = get_u32(is);
        std::vector<std::size_t> shape(rank);
        std::size_t n = 1;
        for (auto& d : shape) {
            d = static_cast<std::size_t>(get_u64(is));
            n *= d;
        }
        std::vector<double> data(n);
        for (auto& v : data) v = get_f64(is);
        if (!is) throw std::runtime_error("load_bundle: truncated file " + path);
        out.emplace_back(std::move(name), ad::Tensor::from(std::move(shape), std::move(data)));
    }
    return out;
}

}  // namespace dst
