// SPDX-FileCopyrightText: 2026 pcz contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <unordered_set>
#include <vector>

#include "pcz/pcio.hpp"

namespace pcz {

// Child bit convention: bit k of an occupancy symbol is the child whose cell
// offsets are ((k>>2)&1, (k>>1)&1, k&1) on (x,y,z). Codes are the Morton
// interleave of the cell index with x in the high bit of each triple, so a
// child code is parent<<3 | k and sorted codes walk parents in order with
// children by ascending child index; this is the coding traversal.
uint64_t morton_encode(uint32_t ix, uint32_t iy, uint32_t iz);
void morton_decode(uint64_t code, int level, uint32_t& ix, uint32_t& iy, uint32_t& iz);

constexpr int kMaxOctreeDepth = 16;

struct OctreeConfig {
    int depth = 0;  // leaves live at this level
    BoundingCube bounds;
};

struct OctreeLevel {
    std::vector<uint64_t> codes;   // sorted Morton codes of occupied octants
    std::vector<uint8_t> symbols;  // per octant; empty at the leaf level

    size_t count() const { return codes.size(); }
};

struct TraversalItem {
    int level;
    uint32_t index;         // position within the level
    uint32_t parent_index;  // position within level-1; UINT32_MAX for the root
};

class Octree {
public:
    static Octree build(const PointCloud& cloud, const OctreeConfig& config);

    // Rebuild structure from the level-by-level symbol stream (losslessness
    // check; the codec decodes incrementally instead of calling this).
    static Octree from_symbols(const OctreeConfig& config, const std::vector<uint8_t>& symbols);

    const OctreeConfig& config() const { return cfg_; }
    int depth() const { return cfg_.depth; }
    const OctreeLevel& level(int l) const { return levels_[size_t(l)]; }
    size_t non_leaf_count() const;

    double cell_size(int l) const;
    Vec3d cell_center(int l, uint64_t code) const;
    PointCloud decode_centers(int l) const;

    std::vector<TraversalItem> traversal_order() const;
    std::vector<uint8_t> symbol_stream() const;  // traversal order

    Octree truncated(int new_depth) const;

private:
    OctreeConfig cfg_;
    std::vector<OctreeLevel> levels_;
};

// Occupancy of one level as a queryable set; out-of-range cells read as 0.
// Reconstructible from the previous level's symbols alone, which is what the
// decoder uses (verified against the stored octants in tests).
struct LevelGrid {
    int level = 0;
    std::unordered_set<uint64_t> codes;

    bool occupied(int64_t ix, int64_t iy, int64_t iz) const {
        const int64_t n = int64_t(1) << level;
        if (ix < 0 || iy < 0 || iz < 0 || ix >= n || iy >= n || iz >= n) return false;
        return codes.count(morton_encode(uint32_t(ix), uint32_t(iy), uint32_t(iz))) != 0;
    }

    static LevelGrid from_level(const Octree& tree, int l);
    static LevelGrid from_parent_symbols(const OctreeLevel& parent, int parent_level);
};

}  // namespace pcz
