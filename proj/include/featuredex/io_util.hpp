#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "featuredex/errors.hpp"

namespace featuredex {

/// Bounds-checked little-endian reader over a byte buffer. All binary
/// parsers go through this so malformed input surfaces as a structured
/// Truncated error instead of an out-of-range read.
class ByteReader {
public:
    ByteReader(const uint8_t* data, size_t size, std::string what)
        : data_(data), size_(size), what_(std::move(what)) {}

    size_t remaining() const { return size_ - pos_; }
    size_t position() const { return pos_; }

    void require(size_t n) const {
        if (remaining() < n)
            throw Error(Err::Truncated, what_ + ": needs " + std::to_string(n) +
                                            " more bytes at offset " +
                                            std::to_string(pos_) + ", has " +
                                            std::to_string(remaining()));
    }

    const uint8_t* take(size_t n) {
        require(n);
        const uint8_t* p = data_ + pos_;
        pos_ += n;
        return p;
    }

    uint8_t u8() { return *take(1); }

    uint16_t u16() {
        const uint8_t* p = take(2);
        return static_cast<uint16_t>(p[0]) | static_cast<uint16_t>(p[1]) << 8;
    }

    uint32_t u32() {
        const uint8_t* p = take(4);
        return static_cast<uint32_t>(p[0]) | static_cast<uint32_t>(p[1]) << 8 |
               static_cast<uint32_t>(p[2]) << 16 | static_cast<uint32_t>(p[3]) << 24;
    }

    uint64_t u64() {
        uint64_t lo = u32();
        uint64_t hi = u32();
        return lo | hi << 32;
    }

    float f32() {
        uint32_t bits = u32();
        float out;
        std::memcpy(&out, &bits, 4);
        return out;
    }

private:
    const uint8_t* data_;
    size_t size_;
    size_t pos_ = 0;
    std::string what_;
};

/// Little-endian byte buffer builder.
class ByteWriter {
public:
    void u8(uint8_t v) { buf_.push_back(v); }

    void u16(uint16_t v) {
        buf_.push_back(static_cast<uint8_t>(v));
        buf_.push_back(static_cast<uint8_t>(v >> 8));
    }

    void u32(uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<uint8_t>(v >> 8 * i));
    }

    void u64(uint64_t v) {
        for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<uint8_t>(v >> 8 * i));
    }

    void f32(float v) {
        uint32_t bits;
        std::memcpy(&bits, &v, 4);
        u32(bits);
    }

    void bytes(const void* p, size_t n) {
        const uint8_t* b = static_cast<const uint8_t*>(p);
        buf_.insert(buf_.end(), b, b + n);
    }

    const std::vector<uint8_t>& data() const { return buf_; }
    std::vector<uint8_t> take() { return std::move(buf_); }

private:
    std::vector<uint8_t> buf_;
};

/// Reads a whole file; throws IoFailure if it cannot be opened or read.
std::vector<uint8_t> read_file(const std::filesystem::path& path);

/// Writes a file atomically: the content goes to a temporary in the same
/// directory which is renamed over the target, so a failure never leaves
/// partial output behind.
void write_file_atomic(const std::filesystem::path& path, const void* data, size_t size);
void write_file_atomic(const std::filesystem::path& path, const std::vector<uint8_t>& bytes);
void write_file_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace featuredex
