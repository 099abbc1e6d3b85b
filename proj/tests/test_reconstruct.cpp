// SPDX-FileCopyrightText: 2026 pcz contributors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "pcz/metrics.hpp"
#include "pcz/reconstruct.hpp"
#include "pcz/synth.hpp"
#include "pcz/trainer.hpp"
#include "test_util.hpp"

using namespace pcz;

namespace {

std::vector<Octree> quadric_trees(uint64_t seed, int frames, size_t points, int depth) {
    SynthParams p;
    p.kind = SceneKind::Quadric;
    p.n_points = points;
    p.noise = 0.005;
    p.extent = 16.0;
    p.patch_scale = 0.5;
    Rng rng(seed);
    std::vector<Octree> trees;
    for (int f = 0; f < frames; ++f) {
        Rng fr = rng.fork(uint64_t(f) + 1);
        const PointCloud cloud = synth_scene(p, fr);
        OctreeConfig oc;
        oc.depth = depth;
        oc.bounds = compute_bounds(cloud, 0.0);
        trees.push_back(Octree::build(cloud, oc));
    }
    return trees;
}

// Full 8x8x8 occupancy: every non-leaf symbol is 255.
Octree full_grid_tree(int depth) {
    PointCloud c;
    const int n = 1 << depth;
    const float cell = 1.0f / float(n);
    for (int x = 0; x < n; ++x)
        for (int y = 0; y < n; ++y)
            for (int z = 0; z < n; ++z)
                c.pts.push_back(Vec3f{(x + 0.5f) * cell, (y + 0.5f) * cell, (z + 0.5f) * cell});
    OctreeConfig oc;
    oc.depth = depth;
    oc.bounds.origin = Vec3d{0, 0, 0};
    oc.bounds.side = 1.0;
    return Octree::build(c, oc);
}

ModelBundle make_bundle(int max_level, uint64_t seed = 3) {
    BundleConfig bc;
    bc.model = testutil::tiny_model_config();
    bc.max_level = max_level;
    bc.seed = seed;
    return ModelBundle::fresh(bc);
}

}  // namespace

TEST_CASE("degenerate corpus: trained prediction is symbol 255 everywhere") {
    std::vector<Octree> corpus;
    for (int i = 0; i < 3; ++i) corpus.push_back(full_grid_tree(3));
    ModelBundle bundle = make_bundle(2, 11);
    CorpusDataset ds = CorpusDataset::build(corpus, bundle.config().model, 2);
    TrainOptions to;
    to.epochs = 40;
    to.lr = 3e-3;
    to.seed = 2;
    train_bundle(bundle, ds, to);

    const Octree tree = full_grid_tree(3).truncated(2);
    const PredictedLeafSet pred = predict_leaf_symbols(tree, bundle);
    size_t all255 = 0;
    for (uint8_t s : pred.symbols) all255 += (s == 255) ? 1 : 0;
    CHECK(all255 == pred.symbols.size());
    CHECK(pred.xp.size() == 8 * tree.level(2).count());
}

TEST_CASE("argmax tie breaks to the smallest nonzero symbol") {
    ModelBundle bundle = make_bundle(2, 5);
    // zero the level-2 header output layer: identical logits for all symbols
    for (Param* p : bundle.level(2).params().list())
        if (p->name == "l2.head4.w" || p->name == "l2.head4.b") std::fill(p->w.begin(), p->w.end(), 0.0f);
    const Octree tree = full_grid_tree(2);
    const PredictedLeafSet pred = predict_leaf_symbols(tree.truncated(2), bundle);
    for (uint8_t s : pred.symbols) CHECK(s == 1);
}

TEST_CASE("prediction is deterministic for a fixed bundle and tree") {
    Rng rng(6);
    const Octree tree = testutil::random_tree(rng, 300, 3, 9.0);
    const ModelBundle bundle = make_bundle(3, 8);
    const PredictedLeafSet a = predict_leaf_symbols(tree, bundle);
    const PredictedLeafSet b = predict_leaf_symbols(tree, bundle);
    CHECK(a.symbols == b.symbols);
    REQUIRE(a.xp.size() == b.xp.size());
    for (size_t i = 0; i < a.xp.size(); ++i) {
        CHECK(a.xp.pts[i].x == b.xp.pts[i].x);
        CHECK(a.xp.pts[i].y == b.xp.pts[i].y);
        CHECK(a.xp.pts[i].z == b.xp.pts[i].z);
    }
}

TEST_CASE("prediction requires a deep-enough bundle") {
    Rng rng(7);
    const Octree tree = testutil::random_tree(rng, 100, 4, 9.0);
    const ModelBundle bundle = make_bundle(3);
    CHECK_THROWS_AS(predict_leaf_symbols(tree, bundle), ValidationError);
}

TEST_CASE("zero refinement head gives zero offsets, so x^r equals x^p") {
    Rng rng(8);
    const Octree tree = testutil::random_tree(rng, 200, 3, 9.0);
    ModelBundle bundle = make_bundle(3, 9);
    RefineModel& rm = bundle.add_refine(3);
    for (Param* p : rm.params().list())
        if (p->name == "r3.head.w" || p->name == "r3.head.b") std::fill(p->w.begin(), p->w.end(), 0.0f);
    const PredictedLeafSet pred = predict_leaf_symbols(tree, bundle);
    const OffsetField off = refine_offsets(tree, bundle);
    const PointCloud xr = apply_offsets(pred, off);
    REQUIRE(xr.size() == pred.xp.size());
    for (size_t i = 0; i < xr.size(); ++i) {
        CHECK(xr.pts[i].x == pred.xp.pts[i].x);
        CHECK(xr.pts[i].y == pred.xp.pts[i].y);
        CHECK(xr.pts[i].z == pred.xp.pts[i].z);
    }
}

TEST_CASE("offsets are bounded by half a child cell on every axis") {
    Rng rng(9);
    const Octree tree = testutil::random_tree(rng, 400, 3, 9.0);
    ModelBundle bundle = make_bundle(3, 10);
    RefineModel& rm = bundle.add_refine(3);
    // exaggerate raw outputs; tanh must still clamp
    for (Param* p : rm.params().list())
        if (p->name == "r3.head.b")
            for (float& w : p->w) w = 50.0f;
    const OffsetField off = refine_offsets(tree, bundle);
    const double bound = tree.config().bounds.side / double(1 << (3 + 2));
    CHECK(off.bound == bound);
    for (const auto& o : off.offsets)
        for (double v : o) CHECK(std::fabs(v) <= bound);
}

TEST_CASE("apply_offsets masks unset children, matching a naive loop") {
    Rng rng(10);
    const Octree tree = testutil::random_tree(rng, 150, 2, 5.0);
    const ModelBundle bundle = make_bundle(2, 12);
    PredictedLeafSet pred = predict_leaf_symbols(tree, bundle);
    OffsetField off;
    off.bound = 1.0;
    off.offsets.resize(pred.leaf_codes.size());
    for (auto& o : off.offsets)
        for (double& v : o) v = rng.uniform(-0.5, 0.5);

    const PointCloud got = apply_offsets(pred, off);
    // naive reference
    std::vector<Vec3f> expect;
    size_t j = 0;
    for (size_t i = 0; i < pred.leaf_codes.size(); ++i)
        for (int k = 0; k < 8; ++k) {
            if (!(pred.symbols[i] & (1u << k))) continue;
            const Vec3f& p = pred.xp.pts[j++];
            expect.push_back(Vec3f{float(double(p.x) + off.offsets[i][size_t(3 * k)]),
                                   float(double(p.y) + off.offsets[i][size_t(3 * k + 1)]),
                                   float(double(p.z) + off.offsets[i][size_t(3 * k + 2)])});
        }
    REQUIRE(got.size() == expect.size());
    for (size_t i = 0; i < expect.size(); ++i) {
        CHECK(got.pts[i].x == expect[i].x);
        CHECK(got.pts[i].y == expect[i].y);
        CHECK(got.pts[i].z == expect[i].z);
    }

    // one-bit symbol: exactly one point moves
    PredictedLeafSet single;
    single.child_level = 3;
    single.leaf_codes = {0};
    single.symbols = {0b00000001};
    single.xp.pts = {Vec3f{1, 1, 1}};
    OffsetField off1;
    off1.bound = 1.0;
    off1.offsets.resize(1);
    off1.offsets[0].fill(0.25);
    const PointCloud moved = apply_offsets(single, off1);
    REQUIRE(moved.size() == 1);
    CHECK(moved.pts[0].x == 1.25f);
}

TEST_CASE("refinement training freezes the entropy models") {
    std::vector<Octree> gt = quadric_trees(77, 3, 400, 4);
    ModelBundle bundle = make_bundle(3, 13);
    std::vector<std::vector<std::vector<float>>> before;
    for (int l = 1; l <= 3; ++l) before.push_back(bundle.level(l).params().snapshot());
    RefineTrainOptions ro;
    ro.epochs = 1;
    ro.lr = 1e-3;
    train_refinement(bundle, 3, gt, ro);
    for (int l = 1; l <= 3; ++l) CHECK(bundle.level(l).params().snapshot() == before[size_t(l) - 1]);
    CHECK(bundle.refine(3) != nullptr);
}

TEST_CASE("trained offsets beat zero offsets on the training frames") {
    std::vector<Octree> gt = quadric_trees(91, 4, 500, 4);
    ModelBundle bundle = make_bundle(3, 14);
    // teach the deepest entropy model a little structure first
    CorpusDataset ds = CorpusDataset::build(gt, bundle.config().model, 3);
    TrainOptions to;
    to.epochs = 4;
    to.lr = 2e-3;
    train_bundle(bundle, ds, to);

    // zero-offset baseline: cd_max(x^p, x^gt) averaged over frames
    double zero_loss = 0.0;
    for (const Octree& t : gt) {
        const Octree tree = t.truncated(3);
        const PredictedLeafSet pred = predict_leaf_symbols(tree, bundle);
        zero_loss += cd_max(pred.xp, t.decode_centers(4));
    }
    zero_loss /= double(gt.size());

    RefineTrainOptions ro;
    ro.epochs = 3;
    ro.lr = 2e-3;
    train_refinement(bundle, 3, gt, ro);

    double trained_loss = 0.0;
    for (const Octree& t : gt) {
        const Octree tree = t.truncated(3);
        const PointCloud xr = reconstruct_cloud(tree, bundle, RefineMode::Full);
        trained_loss += cd_max(xr, t.decode_centers(4));
    }
    trained_loss /= double(gt.size());
    INFO("zero-offset " << zero_loss << " vs trained " << trained_loss);
    CHECK(trained_loss <= zero_loss + 1e-12);
}

TEST_CASE("reconstruct_cloud mode off returns plain centers") {
    Rng rng(15);
    const Octree tree = testutil::random_tree(rng, 200, 3, 7.0);
    const ModelBundle bundle = make_bundle(3, 15);
    const PointCloud a = reconstruct_cloud(tree, bundle, RefineMode::Off);
    const PointCloud b = tree.decode_centers(3);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) CHECK(a.pts[i].x == b.pts[i].x);
}

TEST_CASE("missing refinement model is a clear validation error") {
    Rng rng(16);
    const Octree tree = testutil::random_tree(rng, 100, 3, 7.0);
    const ModelBundle bundle = make_bundle(3, 17);
    CHECK_THROWS_AS(refine_offsets(tree, bundle), ValidationError);
}
