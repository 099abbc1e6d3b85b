// SPDX-FileCopyrightText: 2026 pcz contributors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pcz/context.hpp"
#include "test_util.hpp"

using namespace pcz;

TEST_CASE("neighbor block: isolated octant is center-only") {
    Rng rng(1);
    PointCloud c;
    c.pts.push_back(Vec3f{0.51f, 0.51f, 0.51f});
    OctreeConfig cfg;
    cfg.depth = 4;
    cfg.bounds.origin = Vec3d{0, 0, 0};
    cfg.bounds.side = 1.0;
    const Octree t = Octree::build(c, cfg);
    const LevelGrid g = LevelGrid::from_level(t, 4);
    const BinBlock b = neighbor_block(g, t.level(4).codes[0], 9);
    CHECK(b.count() == 1);
    CHECK(b.get(4, 4, 4));
}

TEST_CASE("neighbor block: root level is a 1-cell grid") {
    Rng rng(2);
    const Octree t = testutil::random_tree(rng, 50, 3);
    const LevelGrid g = LevelGrid::from_level(t, 0);
    const BinBlock b = neighbor_block(g, 0, 9);
    CHECK(b.count() == 1);
    CHECK(b.get(4, 4, 4));
}

TEST_CASE("neighbor block equals brute-force window extraction") {
    Rng rng(3);
    const Octree t = testutil::random_tree(rng, 2000, 6);
    for (int l = 1; l <= 6; ++l) {
        const LevelGrid g = LevelGrid::from_level(t, l);
        const auto& codes = t.level(l).codes;
        const size_t step = std::max<size_t>(1, codes.size() / 200);
        for (size_t i = 0; i < codes.size(); i += step) {
            const BinBlock b = neighbor_block(g, codes[i], 9);
            uint32_t cx, cy, cz;
            morton_decode(codes[i], l, cx, cy, cz);
            for (int dx = -4; dx <= 4; ++dx)
                for (int dy = -4; dy <= 4; ++dy)
                    for (int dz = -4; dz <= 4; ++dz) {
                        const bool expect = g.occupied(int64_t(cx) + dx, int64_t(cy) + dy, int64_t(cz) + dz);
                        CHECK(b.get(dx + 4, dy + 4, dz + 4) == expect);
                    }
        }
    }
}

TEST_CASE("sibling block: first occupied child sees all zeros") {
    const BinBlock b = sibling_block({}, 0);
    CHECK(b.count() == 0);
}

TEST_CASE("sibling block: child 0 symbol 255 fills its 2x2x2 corner") {
    const BinBlock b = sibling_block({{0, 255}}, 1);
    CHECK(b.count() == 8);
    for (int x = 0; x < 2; ++x)
        for (int y = 0; y < 2; ++y)
            for (int z = 0; z < 2; ++z) CHECK(b.get(x, y, z));
    CHECK_FALSE(b.get(2, 0, 0));
}

TEST_CASE("sibling block: scatter positions follow the child bit convention") {
    // child 5 = offsets (1,0,1); its grandchild bit 3 = offsets (0,1,1)
    const BinBlock b = sibling_block({{5, uint8_t(1u << 3)}}, 7);
    CHECK(b.count() == 1);
    CHECK(b.get(2 + 0, 0 + 1, 2 + 1));
}

TEST_CASE("sibling block: sequential replay equals one-shot accumulation") {
    Rng rng(4);
    for (int trial = 0; trial < 50; ++trial) {
        uint8_t parent_sym = uint8_t(1 + rng.below(255));
        std::vector<std::pair<int, uint8_t>> coded;
        SiblingAccum acc;
        for (int k = 0; k < 8; ++k) {
            if (!(parent_sym & (1u << k))) continue;
            // before coding child k, the accumulated block must equal the
            // one-shot builder over earlier coded siblings
            const BinBlock expect = sibling_block(coded, k);
            CHECK(acc.occupancy() == expect);
            // target's own slot is still zero
            const int bx = ((k >> 2) & 1) * 2, by = ((k >> 1) & 1) * 2, bz = (k & 1) * 2;
            for (int j = 0; j < 8; ++j)
                CHECK_FALSE(acc.occupancy().get(bx + ((j >> 2) & 1), by + ((j >> 1) & 1), bz + (j & 1)));
            const uint8_t sym = uint8_t(1 + rng.below(255));
            coded.push_back({k, sym});
            acc.add_sibling(k, sym);
        }
    }
}

TEST_CASE("known mask marks absent siblings and coded siblings") {
    SiblingAccum acc;
    acc.set_parent_symbol(0b00000011);  // children 0 and 1 exist, 2..7 absent
    // absent children regions are known (zero) immediately
    CHECK(acc.known().count() == 6 * 8);
    acc.add_sibling(0, 255);
    CHECK(acc.known().count() == 7 * 8);
    CHECK(acc.occupancy().count() == 8);
}

TEST_CASE("octant info: root and first-level child") {
    const OctantInfo root = octant_info(0, 0);
    CHECK(root.level == 0);
    CHECK(root.cx == 0.5);
    CHECK(root.cy == 0.5);
    CHECK(root.cz == 0.5);
    const OctantInfo child0 = octant_info(1, 0);
    CHECK(child0.cx == 0.25);
    CHECK(child0.cy == 0.25);
    CHECK(child0.cz == 0.25);
    CHECK(child0.child_idx == 0);
    const OctantInfo child5 = octant_info(1, 5);
    CHECK(child5.cx == 0.75);
    CHECK(child5.cy == 0.25);
    CHECK(child5.cz == 0.75);
}

TEST_CASE("octant info denormalizes to decode_centers coordinates") {
    Rng rng(5);
    const Octree t = testutil::random_tree(rng, 300, 5, 20.0);
    const BoundingCube& b = t.config().bounds;
    for (int l = 0; l <= 5; ++l) {
        const PointCloud d = t.decode_centers(l);
        for (size_t i = 0; i < t.level(l).count(); ++i) {
            const OctantInfo info = octant_info(l, t.level(l).codes[i]);
            CHECK(float(b.origin.x + info.cx * b.side) == doctest::Approx(d.pts[i].x).epsilon(1e-6));
            CHECK(float(b.origin.y + info.cy * b.side) == doctest::Approx(d.pts[i].y).epsilon(1e-6));
            CHECK(float(b.origin.z + info.cz * b.side) == doctest::Approx(d.pts[i].z).epsilon(1e-6));
        }
    }
}
