#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "uvsg/tensor.hpp"

namespace uvsg {

// UVSG tensor file: magic "UVSG", 1-byte version, 1-byte dtype
// (0=f32, 1=f64, 2=u8), 1-byte rank, rank x 4-byte little-endian unsigned
// extents, then the row-major payload little-endian.
enum class Dtype : std::uint8_t { f32 = 0, f64 = 1, u8 = 2 };

inline constexpr std::uint8_t kTensorFormatVersion = 1;

namespace detail {

inline void write_u32_le(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t read_u32_le(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

template <typename T>
void write_scalar_le(std::ostream& os, T v) {
    static_assert(sizeof(T) <= 8);
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    // Host is little-endian on every supported target; assert once at runtime.
    os.write(reinterpret_cast<const char*>(b), sizeof(T));
}

inline bool host_is_little_endian() {
    const std::uint16_t one = 1;
    unsigned char b;
    std::memcpy(&b, &one, 1);
    return b == 1;
}

}  // namespace detail

template <typename T>
void write_tensor(std::ostream& os, const TensorT<T>& t, Dtype dtype = Dtype::f32) {
    if (!detail::host_is_little_endian()) throw IoError("big-endian hosts unsupported");
    os.write("UVSG", 4);
    const std::uint8_t ver = kTensorFormatVersion;
    const std::uint8_t dt = static_cast<std::uint8_t>(dtype);
    const std::uint8_t rank = static_cast<std::uint8_t>(t.rank());
    os.write(reinterpret_cast<const char*>(&ver), 1);
    os.write(reinterpret_cast<const char*>(&dt), 1);
    os.write(reinterpret_cast<const char*>(&rank), 1);
    for (int e : t.shape) detail::write_u32_le(os, static_cast<std::uint32_t>(e));
    for (T v : t.data) {
        switch (dtype) {
            case Dtype::f32: detail::write_scalar_le(os, static_cast<float>(v)); break;
            case Dtype::f64: detail::write_scalar_le(os, static_cast<double>(v)); break;
            case Dtype::u8: {
                const std::uint8_t b = static_cast<std::uint8_t>(v);
                os.write(reinterpret_cast<const char*>(&b), 1);
                break;
            }
        }
    }
    if (!os) throw IoError("tensor write failed");
}

template <typename T = float>
TensorT<T> read_tensor(std::istream& is) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "UVSG", 4) != 0) throw IoError("bad tensor magic");
    std::uint8_t ver = 0, dt = 0, rank = 0;
    is.read(reinterpret_cast<char*>(&ver), 1);
    is.read(reinterpret_cast<char*>(&dt), 1);
    is.read(reinterpret_cast<char*>(&rank), 1);
    if (ver != kTensorFormatVersion) throw IoError("unsupported tensor format version");
    if (dt > 2) throw IoError("unknown dtype code");
    Shape shape(rank);
    for (int i = 0; i < rank; ++i) shape[i] = static_cast<int>(detail::read_u32_le(is));
    TensorT<T> t(shape);
    for (std::size_t i = 0; i < t.data.size(); ++i) {
        switch (static_cast<Dtype>(dt)) {
            case Dtype::f32: {
                float v;
                is.read(reinterpret_cast<char*>(&v), 4);
                t.data[i] = static_cast<T>(v);
                break;
            }
            case Dtype::f64: {
                double v;
                is.read(reinterpret_cast<char*>(&v), 8);
                t.data[i] = static_cast<T>(v);
                break;
            }
            case Dtype::u8: {
                std::uint8_t v;
                is.read(reinterpret_cast<char*>(&v), 1);
                t.data[i] = static_cast<T>(v);
                break;
            }
        }
    }
    if (!is) throw IoError("truncated tensor payload");
    return t;
}

template <typename T>
void save_tensor(const std::string& path, const TensorT<T>& t, Dtype dtype = Dtype::f32) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for write: " + path);
    write_tensor(os, t, dtype);
}

template <typename T = float>
TensorT<T> load_tensor(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open for read: " + path);
    return read_tensor<T>(is);
}

// 8-bit PGM preview of a [1,H,W] map in [0,1].
template <typename T>
void save_pgm(const std::string& path, const TensorT<T>& t) {
    if (t.rank() != 3 || t.shape[0] != 1) throw ShapeError("save_pgm expects [1,H,W]");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for write: " + path);
    const int h = t.shape[1], w = t.shape[2];
    os << "P5\n" << w << " " << h << "\n255\n";
    for (std::size_t i = 0; i < t.data.size(); ++i) {
        double v = std::clamp(static_cast<double>(t.data[i]), 0.0, 1.0);
        unsigned char b = static_cast<unsigned char>(std::lround(v * 255.0));
        os.write(reinterpret_cast<const char*>(&b), 1);
    }
    if (!os) throw IoError("pgm write failed");
}

}  // namespace uvsg
