// Copyright the vidbossa authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.
#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "vidbossa/errors.hpp"

namespace vidbossa {

// All on-disk multi-byte fields are little-endian regardless of host order.

class ByteWriter {
public:
    void u8(uint8_t v) { buf_.push_back(v); }
    void u32le(uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<uint8_t>(v >> (8 * i)));
    }
    void u64le(uint64_t v) {
        for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<uint8_t>(v >> (8 * i)));
    }
    void f64le(double v) {
        uint64_t bits;
        std::memcpy(&bits, &v, sizeof(bits));
        u64le(bits);
    }
    void bytes(const void* data, size_t len) {
        const auto* p = static_cast<const uint8_t*>(data);
        buf_.insert(buf_.end(), p, p + len);
    }
    const std::vector<uint8_t>& data() const { return buf_; }

private:
    std::vector<uint8_t> buf_;
};

/// Cursor over an in-memory file image. Read overruns raise FormatError
/// naming the byte offset, so truncated files are reported precisely.
class ByteReader {
public:
    ByteReader(const uint8_t* data, size_t size, std::string name)
        : data_(data), size_(size), name_(std::move(name)) {}

    uint8_t u8() { return take(1)[0]; }
    uint32_t u32le() {
        const uint8_t* p = take(4);
        return static_cast<uint32_t>(p[0]) | static_cast<uint32_t>(p[1]) << 8 |
               static_cast<uint32_t>(p[2]) << 16 | static_cast<uint32_t>(p[3]) << 24;
    }
    uint64_t u64le() {
        const uint8_t* p = take(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(p[i]) << (8 * i);
        return v;
    }
    double f64le() {
        uint64_t bits = u64le();
        double v;
        std::memcpy(&v, &bits, sizeof(v));
        return v;
    }
    const uint8_t* take(size_t len) {
        if (pos_ + len > size_) {
            throw FormatError(name_ + ": truncated at byte offset " + std::to_string(pos_) +
                              " (need " + std::to_string(len) + " more bytes, have " +
                              std::to_string(size_ - pos_) + ")");
        }
        const uint8_t* p = data_ + pos_;
        pos_ += len;
        return p;
    }
    size_t offset() const { return pos_; }
    size_t remaining() const { return size_ - pos_; }

private:
    const uint8_t* data_;
    size_t size_;
    size_t pos_ = 0;
    std::string name_;
};

std::vector<uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, const std::vector<uint8_t>& bytes);
void write_file_text(const std::filesystem::path& path, const std::string& text);

} // namespace vidbossa
