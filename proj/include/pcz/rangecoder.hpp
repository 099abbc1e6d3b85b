// SPDX-FileCopyrightText: 2026 pcz contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "pcz/common.hpp"

namespace pcz {

// Integer frequencies over 256 symbols summing to exactly 2^16, every symbol
// codable (freq >= 1). Built from a probability vector as
// freq = 1 + floor(p * (2^16 - 256)), leftover mass to the most probable
// symbol (ties to the lowest).
struct QuantizedDistribution {
    std::array<uint32_t, 257> cum;  // cum[0] = 0, cum[256] = 65536, strictly increasing

    uint32_t freq(int s) const { return cum[size_t(s) + 1] - cum[size_t(s)]; }
    double bits_for(int s) const;

    static QuantizedDistribution from_probs(const std::array<double, 256>& p);
    static const QuantizedDistribution& uniform();

    bool operator==(const QuantizedDistribution&) const = default;
};

// 32-bit-register range coder with byte renormalization and carry handling
// via a cached byte plus a 64-bit low accumulator. Subdivision uses a 64-bit
// multiply, so the per-symbol rate loss is negligible; the flush costs five
// bytes (the first emitted byte is a dummy the decoder skips).
class RangeEncoder {
public:
    void encode(const QuantizedDistribution& d, int symbol);
    std::vector<uint8_t> finish();

private:
    void shift_low();

    std::vector<uint8_t> out_;
    uint64_t low_ = 0;
    uint32_t range_ = 0xFFFFFFFFu;
    uint8_t cache_ = 0;
    uint64_t cache_size_ = 1;
    bool finished_ = false;
};

class RangeDecoder {
public:
    RangeDecoder(const uint8_t* data, size_t len);

    int decode(const QuantizedDistribution& d);
    size_t consumed() const { return pos_; }

private:
    uint8_t next_byte();

    const uint8_t* data_;
    size_t len_;
    size_t pos_ = 0;
    uint32_t range_ = 0xFFFFFFFFu;
    uint32_t code_ = 0;
};

}  // namespace pcz
