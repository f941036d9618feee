#include "lcmem/io.hpp"

#include <openssl/sha.h>

#include <cstdio>
#include <fstream>

namespace lcmem {

// Standard CRC-32 (IEEE 802.3, reflected, poly 0xEDB88320).
uint32_t crc32(const uint8_t* data, size_t n, uint32_t seed) {
    static const auto table = [] {
        std::array<uint32_t, 256> t{};
        for (uint32_t i = 0; i < 256; ++i) {
            uint32_t c = i;
            for (int k = 0; k < 8; ++k)
                c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : (c >> 1);
            t[i] = c;
        }
        return t;
    }();
    uint32_t c = seed ^ 0xFFFFFFFFu;
    for (size_t i = 0; i < n; ++i)
        c = table[(c ^ data[i]) & 0xFF] ^ (c >> 8);
    return c ^ 0xFFFFFFFFu;
}

Fingerprint sha256(const uint8_t* data, size_t n) {
    Fingerprint out{};
    SHA256(data, n, out.data());
    return out;
}

std::string hex(const Fingerprint& fp) {
    static const char* digits = "0123456789abcdef";
    std::string s;
    s.reserve(64);
    for (uint8_t b : fp) {
        s.push_back(digits[b >> 4]);
        s.push_back(digits[b & 0xF]);
    }
    return s;
}

std::vector<uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw format_error("cannot open file: " + path, 0);
    in.seekg(0, std::ios::end);
    auto n = static_cast<size_t>(in.tellg());
    in.seekg(0);
    std::vector<uint8_t> bytes(n);
    if (n > 0) in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(n));
    if (!in) throw format_error("short read: " + path, 0);
    return bytes;
}

void write_file(const std::string& path, const std::vector<uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw format_error("cannot create file: " + path, 0);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw format_error("short write: " + path, 0);
}

std::vector<uint8_t> MatrixContainer::serialize(const char magic[4]) const {
    ByteWriter w;
    w.bytes(magic, 4);
    w.u32(kFormatVersion);
    w.u64(rows);
    w.u32(dim);
    w.bytes(fingerprint.data(), fingerprint.size());
    for (uint64_t id : ids) w.u64(id);
    for (int64_t ident : identities) w.i64(ident);
    w.bytes(data.data(), data.size() * sizeof(float));
    w.finish_with_crc();
    return w.take();
}

MatrixContainer MatrixContainer::parse(const std::vector<uint8_t>& bytes, const char magic[4]) {
    ByteReader r(bytes);
    r.check_crc("matrix container");

    char m[4];
    r.bytes(m, 4);
    if (std::memcmp(m, magic, 4) != 0)
        throw format_error(std::string("bad magic, expected ") + std::string(magic, 4), 0);
    uint32_t version = r.u32();
    if (version != kFormatVersion)
        throw format_error("unsupported version " + std::to_string(version), 4);

    MatrixContainer c;
    c.rows = r.u64();
    size_t dim_off = r.offset();
    c.dim = r.u32();
    if (c.rows == 0 || c.dim == 0)
        throw format_error("empty container", dim_off);

    const uint64_t expect = 4 + 4 + 8 + 4 + 32 + c.rows * (8 + 8) +
                            c.rows * c.dim * sizeof(float) + 4;
    if (bytes.size() != expect)
        throw format_error("size mismatch: got " + std::to_string(bytes.size()) +
                               ", expected " + std::to_string(expect),
                           r.offset());

    r.bytes(c.fingerprint.data(), c.fingerprint.size());
    c.ids.resize(c.rows);
    for (auto& id : c.ids) id = r.u64();
    c.identities.resize(c.rows);
    for (auto& ident : c.identities) ident = r.i64();
    c.data.resize(c.rows * c.dim);
    r.bytes(c.data.data(), c.data.size() * sizeof(float));
    return c;
}

void MatrixContainer::save(const std::string& path, const char magic[4]) const {
    write_file(path, serialize(magic));
}

MatrixContainer MatrixContainer::load(const std::string& path, const char magic[4]) {
    return parse(read_file(path), magic);
}

} // namespace lcmem
