// SPDX-FileCopyrightText: 2026 pcz contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace pcz {

using Digest256 = std::array<uint8_t, 32>;

// Incremental SHA-256. Used to fingerprint model bundles so a frame can only
// be decoded with the exact parameters that encoded it.
class Sha256 {
public:
    Sha256();
    void update(const void* data, size_t len);
    Digest256 finish();

private:
    void process_block(const uint8_t* p);

    uint32_t h_[8];
    uint8_t buf_[64];
    size_t buf_len_ = 0;
    uint64_t total_ = 0;
};

Digest256 sha256(const void* data, size_t len);
Digest256 sha256(const std::string& s);
std::string hex_digest(const Digest256& d);
Digest256 digest_from_hex(const std::string& hex);

}  // namespace pcz
