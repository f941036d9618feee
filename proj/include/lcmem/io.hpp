#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "lcmem/errors.hpp"

namespace lcmem {

uint32_t crc32(const uint8_t* data, size_t n, uint32_t seed = 0);
inline uint32_t crc32(const std::vector<uint8_t>& v) { return crc32(v.data(), v.size()); }

using Fingerprint = std::array<uint8_t, 32>;
Fingerprint sha256(const uint8_t* data, size_t n);
std::string hex(const Fingerprint& fp);

std::vector<uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, const std::vector<uint8_t>& bytes);

// ---------------------------------------------------------------------------
// Little-endian byte stream helpers. All container formats are LE on disk.
// ---------------------------------------------------------------------------

class ByteWriter {
public:
    void u32(uint32_t v) { put(&v, 4); }
    void u64(uint64_t v) { put(&v, 8); }
    void i64(int64_t v) { put(&v, 8); }
    void f32(float v) { put(&v, 4); }
    void f64(double v) { put(&v, 8); }
    void bytes(const void* p, size_t n) { put(p, n); }

    void finish_with_crc() {
        uint32_t c = crc32(buf_.data(), buf_.size());
        u32(c);
    }

    const std::vector<uint8_t>& data() const { return buf_; }
    std::vector<uint8_t> take() { return std::move(buf_); }

private:
    void put(const void* p, size_t n) {
        const auto* b = static_cast<const uint8_t*>(p);
        buf_.insert(buf_.end(), b, b + n);
    }
    static_assert(std::endian::native == std::endian::little,
                  "serialization assumes a little-endian host");
    std::vector<uint8_t> buf_;
};

class ByteReader {
public:
    ByteReader(const uint8_t* data, size_t n) : data_(data), size_(n) {}
    explicit ByteReader(const std::vector<uint8_t>& v) : ByteReader(v.data(), v.size()) {}

    uint32_t u32() { return get<uint32_t>(); }
    uint64_t u64() { return get<uint64_t>(); }
    int64_t i64() { return get<int64_t>(); }
    float f32() { return get<float>(); }
    double f64() { return get<double>(); }

    void bytes(void* out, size_t n) {
        need(n);
        std::memcpy(out, data_ + pos_, n);
        pos_ += n;
    }

    size_t offset() const { return pos_; }
    size_t remaining() const { return size_ - pos_; }

    // Validates the trailing CRC32 over everything before it.
    void check_crc(const std::string& what) const {
        if (size_ < 4) throw format_error(what + ": file too short for CRC", 0);
        uint32_t stored;
        std::memcpy(&stored, data_ + size_ - 4, 4);
        uint32_t actual = crc32(data_, size_ - 4);
        if (stored != actual)
            throw format_error(what + ": CRC mismatch", size_ - 4);
    }

private:
    template <typename T>
    T get() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, data_ + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    void need(size_t n) const {
        if (pos_ + n > size_)
            throw format_error("unexpected end of data", pos_);
    }
    const uint8_t* data_;
    size_t size_;
    size_t pos_ = 0;
};

// ---------------------------------------------------------------------------
// Shared row-matrix container (atlas files, exported corpus splits).
//
//   magic(4) version(u32) N(u64) d(u32) fingerprint(32B)
//   ids(u64 x N) identities(i64 x N, -1 = none) payload(f32, N*d row-major)
//   crc32(u32)
// ---------------------------------------------------------------------------

struct MatrixContainer {
    uint64_t rows = 0;
    uint32_t dim = 0;
    Fingerprint fingerprint{};
    std::vector<uint64_t> ids;
    std::vector<int64_t> identities;
    std::vector<float> data; // rows * dim

    std::vector<uint8_t> serialize(const char magic[4]) const;
    static MatrixContainer parse(const std::vector<uint8_t>& bytes, const char magic[4]);

    void save(const std::string& path, const char magic[4]) const;
    static MatrixContainer load(const std::string& path, const char magic[4]);
};

inline constexpr char kMagicAtlas[4] = {'L', 'C', 'M', 'A'};
inline constexpr char kMagicImages[4] = {'L', 'C', 'M', 'I'};
inline constexpr char kMagicParams[4] = {'L', 'C', 'M', 'P'};
inline constexpr uint32_t kFormatVersion = 1;

} // namespace lcmem
