// SPDX-FileCopyrightText: 2026 pcz contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "pcz/entropy_model.hpp"
#include "pcz/rangecoder.hpp"

namespace pcz {

// Frame layout (little-endian), 88 bytes of header followed by the payload:
//   0   4  magic "PCZ1"
//   4   1  version (1)
//   5   1  octree depth
//   6   2  flags (bit 0: refinement suggested)
//   8   8  original point count N
//  16  24  bounds origin (3 x f64)
//  40   8  bounds side (f64)
//  48  32  model bundle hash (sha-256)
//  80   8  payload length in bytes
//  88  ..  range-coded occupancy symbols, level by level
struct FrameHeader {
    static constexpr uint16_t kFlagRefine = 1;
    static constexpr size_t kSize = 88;

    uint8_t version = 1;
    uint8_t depth = 0;
    uint16_t flags = 0;
    uint64_t n_points = 0;
    Vec3d origin;
    double side = 0.0;
    Digest256 bundle_hash{};
    uint64_t payload_len = 0;

    void write(std::vector<uint8_t>& out) const;
    static FrameHeader read(const uint8_t* data, size_t len);
};

struct RateReport {
    uint64_t header_bits = 0;
    uint64_t payload_bits = 0;
    uint64_t n_points = 0;
    uint64_t symbol_count = 0;
    double bpp = 0.0;                 // (header + payload) / N
    double model_bits_estimate = 0.0;  // sum of -log2 of the coded quantized probabilities

    std::string to_kv() const;
    static std::string csv_header();
    std::string to_csv_row(const std::string& name) const;
};

struct EncodeResult {
    std::vector<uint8_t> frame;
    RateReport report;
};

// Test hook: when set, every quantized distribution used by the coder is
// appended, in coding order, so encoder and decoder traces can be compared.
struct CodecTrace {
    std::vector<QuantizedDistribution> dists;
};

EncodeResult encode_frame(const PointCloud& cloud, const Octree& tree, const ModelBundle& bundle, uint16_t flags = 0,
                          CodecTrace* trace = nullptr);

struct DecodedFrame {
    FrameHeader header;
    Octree tree;
};

DecodedFrame decode_frame(const std::vector<uint8_t>& frame, const ModelBundle& bundle, CodecTrace* trace = nullptr);

// Context-free per-level symbol histograms; the benchmark coder the learned
// model has to beat. Shares the frame layout so reports are like for like.
class StaticHistogramModel {
public:
    explicit StaticHistogramModel(int max_level) : counts_(size_t(max_level) + 1) {}

    void add_tree(const Octree& tree);
    void finalize();  // +1 smoothing, builds quantized tables

    int max_level() const { return int(counts_.size()) - 1; }
    const QuantizedDistribution& level_dist(int l) const;

private:
    std::vector<std::array<uint64_t, 256>> counts_{};
    std::vector<QuantizedDistribution> dists_;
};

EncodeResult encode_frame_static(const PointCloud& cloud, const Octree& tree, const StaticHistogramModel& model);

}  // namespace pcz
