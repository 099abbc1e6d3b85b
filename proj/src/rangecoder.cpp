// SPDX-FileCopyrightText: 2026 pcz contributors
// SPDX-License-Identifier: Apache-2.0

#include "pcz/rangecoder.hpp"

#include <cmath>

namespace pcz {

namespace {
constexpr uint32_t kTopValue = 1u << 24;
constexpr uint32_t kTotalBits = 16;
constexpr uint32_t kTotal = 1u << kTotalBits;
}  // namespace

double QuantizedDistribution::bits_for(int s) const {
    return -std::log2(double(freq(s)) / double(kTotal));
}

QuantizedDistribution QuantizedDistribution::from_probs(const std::array<double, 256>& p) {
    std::array<uint32_t, 256> freq;
    uint32_t sum = 0;
    int argmax = 0;
    for (int i = 0; i < 256; ++i) {
        const double pi = p[size_t(i)];
        if (!(pi >= 0.0) || !std::isfinite(pi))
            throw InternalError("quantize: invalid probability at symbol " + std::to_string(i));
        freq[size_t(i)] = 1 + uint32_t(std::floor(pi * double(kTotal - 256)));
        sum += freq[size_t(i)];
        if (pi > p[size_t(argmax)]) argmax = i;
    }
    if (sum > kTotal) throw InternalError("quantize: frequency overflow (probabilities sum above one?)");
    freq[size_t(argmax)] += kTotal - sum;
    QuantizedDistribution q;
    q.cum[0] = 0;
    for (int i = 0; i < 256; ++i) q.cum[size_t(i) + 1] = q.cum[size_t(i)] + freq[size_t(i)];
    return q;
}

const QuantizedDistribution& QuantizedDistribution::uniform() {
    static const QuantizedDistribution q = [] {
        QuantizedDistribution u;
        for (int i = 0; i <= 256; ++i) u.cum[size_t(i)] = uint32_t(i) * 256;
        return u;
    }();
    return q;
}

void RangeEncoder::shift_low() {
    if (uint32_t(low_) < 0xFF000000u || (low_ >> 32) != 0) {
        uint8_t carry = uint8_t(low_ >> 32);
        uint8_t temp = cache_;
        do {
            out_.push_back(uint8_t(temp + carry));
            temp = 0xFF;
        } while (--cache_size_ != 0);
        cache_ = uint8_t(uint32_t(low_) >> 24);
    }
    ++cache_size_;
    low_ = uint64_t(uint32_t(low_) << 8);
}

void RangeEncoder::encode(const QuantizedDistribution& d, int symbol) {
    if (finished_) throw InternalError("encode after finish");
    const uint32_t lo = uint32_t((uint64_t(range_) * d.cum[size_t(symbol)]) >> kTotalBits);
    const uint32_t hi = uint32_t((uint64_t(range_) * d.cum[size_t(symbol) + 1]) >> kTotalBits);
    low_ += lo;
    range_ = hi - lo;
    while (range_ < kTopValue) {
        shift_low();
        range_ <<= 8;
    }
}

std::vector<uint8_t> RangeEncoder::finish() {
    if (!finished_) {
        for (int i = 0; i < 5; ++i) shift_low();
        finished_ = true;
    }
    return std::move(out_);
}

RangeDecoder::RangeDecoder(const uint8_t* data, size_t len) : data_(data), len_(len) {
    next_byte();  // dummy byte emitted by the encoder's first shift_low
    for (int i = 0; i < 4; ++i) code_ = code_ << 8 | next_byte();
}

uint8_t RangeDecoder::next_byte() {
    if (pos_ >= len_) throw FormatError("payload truncated at byte offset " + std::to_string(pos_));
    return data_[pos_++];
}

int RangeDecoder::decode(const QuantizedDistribution& d) {
    // binary search for s with subdivided(cum[s]) <= code < subdivided(cum[s+1])
    int lo = 0, hi = 256;
    while (hi - lo > 1) {
        const int mid = (lo + hi) / 2;
        const uint32_t v = uint32_t((uint64_t(range_) * d.cum[size_t(mid)]) >> kTotalBits);
        if (v <= code_)
            lo = mid;
        else
            hi = mid;
    }
    const int symbol = lo;
    const uint32_t l = uint32_t((uint64_t(range_) * d.cum[size_t(symbol)]) >> kTotalBits);
    const uint32_t h = uint32_t((uint64_t(range_) * d.cum[size_t(symbol) + 1]) >> kTotalBits);
    code_ -= l;
    range_ = h - l;
    while (range_ < kTopValue) {
        code_ = code_ << 8 | next_byte();
        range_ <<= 8;
    }
    return symbol;
}

}  // namespace pcz
