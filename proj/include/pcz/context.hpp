// SPDX-FileCopyrightText: 2026 pcz contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "pcz/octree.hpp"

namespace pcz {

// Packed binary voxel cube (dim^3 cells). Linear index is (x*dim + y)*dim + z.
struct BinBlock {
    int dim = 0;
    std::vector<uint64_t> words;

    BinBlock() = default;
    explicit BinBlock(int d) : dim(d), words((size_t(d) * d * d + 63) / 64, 0) {}

    size_t cells() const { return size_t(dim) * dim * dim; }
    bool get(size_t i) const { return (words[i >> 6] >> (i & 63)) & 1; }
    void set(size_t i) { words[i >> 6] |= uint64_t(1) << (i & 63); }
    bool get(int x, int y, int z) const { return get((size_t(x) * dim + y) * dim + z); }
    void set(int x, int y, int z) { set((size_t(x) * dim + y) * dim + z); }
    size_t count() const;
    bool operator==(const BinBlock&) const = default;
};

// K*K*K window of the level grid centered on the octant. The center cell is
// always occupied; cells outside the grid read 0.
BinBlock neighbor_block(const LevelGrid& grid, uint64_t code, int k);

struct OctantInfo {
    int level = 0;
    double cx = 0, cy = 0, cz = 0;  // cell center / cube side, in [0,1]
    int child_idx = 0;              // index within the parent (0 for the root)
};

OctantInfo octant_info(int level, uint64_t code);

// Accumulates already-coded sibling symbols into the 4x4x4 grandchild-
// resolution block aligned to the parent cell. The target's own 2x2x2 slot
// stays zero until after its symbol is coded, which keeps contexts causal.
class SiblingAccum {
public:
    SiblingAccum() : occ_(4), known_(4) {}

    // Call when a parent symbol becomes available, before coding children;
    // only used for the optional known-mask channel (absent siblings are
    // known-empty the moment the parent symbol is decoded).
    void set_parent_symbol(uint8_t parent_symbol);

    void add_sibling(int child_idx, uint8_t symbol);

    const BinBlock& occupancy() const { return occ_; }
    const BinBlock& known() const { return known_; }

private:
    BinBlock occ_;
    BinBlock known_;
};

// Test-facing one-shot builder: scatter the given (child index, symbol) pairs.
BinBlock sibling_block(const std::vector<std::pair<int, uint8_t>>& coded_siblings, int target_child);

}  // namespace pcz
