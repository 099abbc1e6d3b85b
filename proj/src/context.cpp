// SPDX-FileCopyrightText: 2026 pcz contributors
// SPDX-License-Identifier: Apache-2.0

#include "pcz/context.hpp"

#include <bit>

namespace pcz {

size_t BinBlock::count() const {
    size_t n = 0;
    for (uint64_t w : words) n += size_t(std::popcount(w));
    return n;
}

BinBlock neighbor_block(const LevelGrid& grid, uint64_t code, int k) {
    if ((k & 1) == 0 || k < 1) throw ValidationError("neighbor block size must be odd");
    const int r = k / 2;
    uint32_t cx, cy, cz;
    morton_decode(code, grid.level, cx, cy, cz);
    BinBlock block(k);
    size_t i = 0;
    for (int dx = -r; dx <= r; ++dx)
        for (int dy = -r; dy <= r; ++dy)
            for (int dz = -r; dz <= r; ++dz, ++i)
                if (grid.occupied(int64_t(cx) + dx, int64_t(cy) + dy, int64_t(cz) + dz)) block.set(i);
    return block;
}

OctantInfo octant_info(int level, uint64_t code) {
    uint32_t ix, iy, iz;
    morton_decode(code, level, ix, iy, iz);
    const double inv = 1.0 / double(uint64_t(1) << level);
    OctantInfo info;
    info.level = level;
    info.cx = (double(ix) + 0.5) * inv;
    info.cy = (double(iy) + 0.5) * inv;
    info.cz = (double(iz) + 0.5) * inv;
    info.child_idx = level == 0 ? 0 : int(code & 7);
    return info;
}

namespace {

void scatter_symbol(BinBlock& block, int child_idx, uint8_t bits) {
    const int bx = ((child_idx >> 2) & 1) * 2;
    const int by = ((child_idx >> 1) & 1) * 2;
    const int bz = (child_idx & 1) * 2;
    for (int j = 0; j < 8; ++j)
        if (bits & (1u << j)) block.set(bx + ((j >> 2) & 1), by + ((j >> 1) & 1), bz + (j & 1));
}

}  // namespace

void SiblingAccum::set_parent_symbol(uint8_t parent_symbol) {
    for (int k = 0; k < 8; ++k)
        if (!(parent_symbol & (1u << k))) scatter_symbol(known_, k, 0xFF);  // absent sibling: known empty
}

void SiblingAccum::add_sibling(int child_idx, uint8_t symbol) {
    scatter_symbol(occ_, child_idx, symbol);
    scatter_symbol(known_, child_idx, 0xFF);
}

BinBlock sibling_block(const std::vector<std::pair<int, uint8_t>>& coded_siblings, int target_child) {
    BinBlock block(4);
    for (const auto& [idx, sym] : coded_siblings) {
        if (idx >= target_child) continue;  // causal: earlier siblings only
        scatter_symbol(block, idx, sym);
    }
    return block;
}

}  // namespace pcz
