// SPDX-FileCopyrightText: 2026 pcz contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "pcz/common.hpp"

namespace pcz::wire {

// Little-endian byte packing for checkpoints and frames.

inline void put_bytes(std::vector<uint8_t>& out, const void* p, size_t n) {
    const uint8_t* b = static_cast<const uint8_t*>(p);
    out.insert(out.end(), b, b + n);
}

template <typename T>
void put(std::vector<uint8_t>& out, T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    put_bytes(out, &v, sizeof(T));
}

inline void put_str(std::vector<uint8_t>& out, const std::string& s) {
    put<uint16_t>(out, uint16_t(s.size()));
    put_bytes(out, s.data(), s.size());
}

class Reader {
public:
    Reader(const uint8_t* data, size_t len, std::string origin)
        : data_(data), len_(len), origin_(std::move(origin)) {}

    template <typename T>
    T get() {
        static_assert(std::is_trivially_copyable_v<T>);
        need(sizeof(T));
        T v;
        std::memcpy(&v, data_ + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }

    std::string get_str() {
        uint16_t n = get<uint16_t>();
        need(n);
        std::string s(reinterpret_cast<const char*>(data_ + pos_), n);
        pos_ += n;
        return s;
    }

    void get_bytes(void* dst, size_t n) {
        need(n);
        std::memcpy(dst, data_ + pos_, n);
        pos_ += n;
    }

    size_t pos() const { return pos_; }
    size_t remaining() const { return len_ - pos_; }

private:
    void need(size_t n) const {
        if (pos_ + n > len_)
            throw FormatError(origin_ + ": truncated at byte offset " + std::to_string(pos_));
    }

    const uint8_t* data_;
    size_t len_;
    size_t pos_ = 0;
    std::string origin_;
};

}  // namespace pcz::wire
