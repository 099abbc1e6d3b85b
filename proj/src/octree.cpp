// SPDX-FileCopyrightText: 2026 pcz contributors
// SPDX-License-Identifier: Apache-2.0

#include "pcz/octree.hpp"

#include <algorithm>
#include <cmath>

namespace pcz {

namespace {

// spread the low 16 bits of v so there are two zero bits between each
uint64_t part1by2(uint32_t v) {
    uint64_t x = v & 0xFFFF;
    x = (x | (x << 32)) & 0x001f00000000ffffULL;
    x = (x | (x << 16)) & 0x001f0000ff0000ffULL;
    x = (x | (x << 8)) & 0x100f00f00f00f00fULL;
    x = (x | (x << 4)) & 0x10c30c30c30c30c3ULL;
    x = (x | (x << 2)) & 0x1249249249249249ULL;
    return x;
}

uint32_t compact1by2(uint64_t x) {
    x &= 0x1249249249249249ULL;
    x = (x ^ (x >> 2)) & 0x10c30c30c30c30c3ULL;
    x = (x ^ (x >> 4)) & 0x100f00f00f00f00fULL;
    x = (x ^ (x >> 8)) & 0x001f0000ff0000ffULL;
    x = (x ^ (x >> 16)) & 0x001f00000000ffffULL;
    x = (x ^ (x >> 32)) & 0xFFFF;
    return uint32_t(x);
}

}  // namespace

uint64_t morton_encode(uint32_t ix, uint32_t iy, uint32_t iz) {
    return part1by2(ix) << 2 | part1by2(iy) << 1 | part1by2(iz);
}

void morton_decode(uint64_t code, int level, uint32_t& ix, uint32_t& iy, uint32_t& iz) {
    (void)level;
    ix = compact1by2(code >> 2);
    iy = compact1by2(code >> 1);
    iz = compact1by2(code);
}

Octree Octree::build(const PointCloud& cloud, const OctreeConfig& config) {
    if (config.depth < 1 || config.depth > kMaxOctreeDepth)
        throw ValidationError("octree depth must be in [1, " + std::to_string(kMaxOctreeDepth) + "], got " +
                              std::to_string(config.depth));
    if (cloud.empty()) throw ValidationError("octree build: empty cloud");
    const int L = config.depth;
    const BoundingCube& bc = config.bounds;
    const double cell = bc.side / double(uint64_t(1) << L);
    const int64_t n = int64_t(1) << L;

    std::vector<uint64_t> leaves;
    leaves.reserve(cloud.size());
    for (size_t i = 0; i < cloud.size(); ++i) {
        const Vec3f& p = cloud.pts[i];
        if (!bc.contains(p))
            throw ValidationError("point " + std::to_string(i) + " lies outside the bounding cube");
        int64_t ix = int64_t(std::floor((double(p.x) - bc.origin.x) / cell));
        int64_t iy = int64_t(std::floor((double(p.y) - bc.origin.y) / cell));
        int64_t iz = int64_t(std::floor((double(p.z) - bc.origin.z) / cell));
        // guard against round-up at the far boundary
        ix = std::min(std::max(ix, int64_t(0)), n - 1);
        iy = std::min(std::max(iy, int64_t(0)), n - 1);
        iz = std::min(std::max(iz, int64_t(0)), n - 1);
        leaves.push_back(morton_encode(uint32_t(ix), uint32_t(iy), uint32_t(iz)));
    }
    std::sort(leaves.begin(), leaves.end());
    leaves.erase(std::unique(leaves.begin(), leaves.end()), leaves.end());

    Octree tree;
    tree.cfg_ = config;
    tree.levels_.resize(size_t(L) + 1);
    tree.levels_[size_t(L)].codes = std::move(leaves);
    for (int l = L - 1; l >= 0; --l) {
        const std::vector<uint64_t>& child = tree.levels_[size_t(l) + 1].codes;
        OctreeLevel& cur = tree.levels_[size_t(l)];
        for (size_t i = 0; i < child.size();) {
            const uint64_t parent = child[i] >> 3;
            uint8_t sym = 0;
            while (i < child.size() && (child[i] >> 3) == parent) {
                sym |= uint8_t(1u << (child[i] & 7));
                ++i;
            }
            cur.codes.push_back(parent);
            cur.symbols.push_back(sym);
        }
    }
    return tree;
}

Octree Octree::from_symbols(const OctreeConfig& config, const std::vector<uint8_t>& symbols) {
    Octree tree;
    tree.cfg_ = config;
    tree.levels_.resize(size_t(config.depth) + 1);
    tree.levels_[0].codes = {0};
    size_t pos = 0;
    for (int l = 0; l < config.depth; ++l) {
        OctreeLevel& cur = tree.levels_[size_t(l)];
        OctreeLevel& next = tree.levels_[size_t(l) + 1];
        cur.symbols.reserve(cur.codes.size());
        for (uint64_t code : cur.codes) {
            if (pos >= symbols.size()) throw FormatError("symbol stream truncated at symbol " + std::to_string(pos));
            uint8_t sym = symbols[pos++];
            if (sym == 0) throw FormatError("zero occupancy symbol at position " + std::to_string(pos - 1));
            cur.symbols.push_back(sym);
            for (int k = 0; k < 8; ++k)
                if (sym & (1u << k)) next.codes.push_back(code << 3 | uint64_t(k));
        }
    }
    if (pos != symbols.size())
        throw FormatError("symbol stream has " + std::to_string(symbols.size() - pos) + " trailing symbols");
    return tree;
}

size_t Octree::non_leaf_count() const {
    size_t n = 0;
    for (int l = 0; l < cfg_.depth; ++l) n += levels_[size_t(l)].count();
    return n;
}

double Octree::cell_size(int l) const { return cfg_.bounds.side / double(uint64_t(1) << l); }

Vec3d Octree::cell_center(int l, uint64_t code) const {
    uint32_t ix, iy, iz;
    morton_decode(code, l, ix, iy, iz);
    const double cell = cell_size(l);
    return Vec3d{cfg_.bounds.origin.x + (double(ix) + 0.5) * cell, cfg_.bounds.origin.y + (double(iy) + 0.5) * cell,
                 cfg_.bounds.origin.z + (double(iz) + 0.5) * cell};
}

PointCloud Octree::decode_centers(int l) const {
    if (l < 0 || l > cfg_.depth) throw ValidationError("decode_centers: level out of range");
    PointCloud cloud;
    cloud.pts.reserve(levels_[size_t(l)].count());
    for (uint64_t code : levels_[size_t(l)].codes) {
        Vec3d c = cell_center(l, code);
        cloud.pts.push_back(Vec3f{float(c.x), float(c.y), float(c.z)});
    }
    return cloud;
}

std::vector<TraversalItem> Octree::traversal_order() const {
    std::vector<TraversalItem> order;
    order.reserve(non_leaf_count());
    for (int l = 0; l < cfg_.depth; ++l) {
        const OctreeLevel& cur = levels_[size_t(l)];
        if (l == 0) {
            order.push_back({0, 0, UINT32_MAX});
            continue;
        }
        const OctreeLevel& par = levels_[size_t(l) - 1];
        uint32_t pi = 0;
        for (uint32_t i = 0; i < cur.count(); ++i) {
            const uint64_t parent = cur.codes[i] >> 3;
            while (par.codes[pi] != parent) ++pi;
            order.push_back({l, i, pi});
        }
    }
    return order;
}

std::vector<uint8_t> Octree::symbol_stream() const {
    std::vector<uint8_t> out;
    out.reserve(non_leaf_count());
    for (int l = 0; l < cfg_.depth; ++l) {
        const OctreeLevel& cur = levels_[size_t(l)];
        out.insert(out.end(), cur.symbols.begin(), cur.symbols.end());
    }
    return out;
}

Octree Octree::truncated(int new_depth) const {
    if (new_depth < 1 || new_depth > cfg_.depth) throw ValidationError("truncated: bad depth");
    Octree tree;
    tree.cfg_ = cfg_;
    tree.cfg_.depth = new_depth;
    tree.levels_.assign(levels_.begin(), levels_.begin() + new_depth + 1);
    tree.levels_[size_t(new_depth)].symbols.clear();
    return tree;
}

LevelGrid LevelGrid::from_level(const Octree& tree, int l) {
    LevelGrid g;
    g.level = l;
    const OctreeLevel& lev = tree.level(l);
    g.codes.reserve(lev.count() * 2);
    g.codes.insert(lev.codes.begin(), lev.codes.end());
    return g;
}

LevelGrid LevelGrid::from_parent_symbols(const OctreeLevel& parent, int parent_level) {
    LevelGrid g;
    g.level = parent_level + 1;
    g.codes.reserve(parent.count() * 4);
    for (size_t i = 0; i < parent.count(); ++i) {
        const uint64_t base = parent.codes[i] << 3;
        const uint8_t sym = parent.symbols[i];
        for (int k = 0; k < 8; ++k)
            if (sym & (1u << k)) g.codes.insert(base | uint64_t(k));
    }
    return g;
}

}  // namespace pcz
