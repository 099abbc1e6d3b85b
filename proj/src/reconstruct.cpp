// SPDX-FileCopyrightText: 2026 pcz contributors
// SPDX-License-Identifier: Apache-2.0

#include "pcz/reconstruct.hpp"

#include <cmath>
#include <ostream>

#include "pcz/metrics.hpp"
#include "pcz/neural.hpp"

namespace pcz {

std::vector<std::vector<double>> leaf_ancestors(const Octree& tree, const ModelBundle& bundle) {
    const int depth = tree.depth();
    const OctreeLevel& leaves = tree.level(depth);
    std::vector<std::vector<double>> out(leaves.count());
    if (depth == 1) {
        const std::vector<double> root = bundle.root_ancestor();
        for (auto& v : out) v = root;
        return out;
    }
    const OctreeLevel& parents = tree.level(depth - 1);
    LevelGrid pgrid = LevelGrid::from_parent_symbols(tree.level(depth - 2), depth - 2);
    const LevelModel& pmodel = bundle.level(depth - 1);
    const int k = bundle.config().model.k;
    std::vector<std::vector<double>> h_child(parents.count());
    for (size_t pi = 0; pi < parents.count(); ++pi) {
        const BinBlock v = neighbor_block(pgrid, parents.codes[pi], k);
        h_child[pi] = pmodel.ancestor_for_children(v, octant_info(depth - 1, parents.codes[pi]));
    }
    size_t pi = 0;
    for (size_t i = 0; i < leaves.count(); ++i) {
        const uint64_t parent = leaves.codes[i] >> 3;
        while (parents.codes[pi] != parent) ++pi;
        out[i] = h_child[pi];
    }
    return out;
}

PredictedLeafSet predict_leaf_symbols(const Octree& tree, const ModelBundle& bundle) {
    const int depth = tree.depth();
    if (!bundle.supports_predict_depth(depth))
        throw ValidationError("bundle cannot predict children at depth " + std::to_string(depth) + "; it has " +
                              bundle.supported_levels_str());
    if (depth + 1 > kMaxOctreeDepth) throw ValidationError("prediction would exceed the maximum octree depth");

    const LevelModel& model = bundle.level(depth);
    const ModelConfig& mc = bundle.config().model;
    const OctreeLevel& leaves = tree.level(depth);
    LevelGrid grid = LevelGrid::from_parent_symbols(tree.level(depth - 1), depth - 1);
    const std::vector<std::vector<double>> han = leaf_ancestors(tree, bundle);

    PredictedLeafSet out;
    out.child_level = depth + 1;
    out.leaf_codes = leaves.codes;
    out.symbols.resize(leaves.count());
    const BinBlock zero_sib(4);  // sibling context is never available one level past the stream

    for (size_t i = 0; i < leaves.count(); ++i) {
        const BinBlock v = neighbor_block(grid, leaves.codes[i], mc.k);
        CtxInputs in;
        in.v = &v;
        in.vsib = &zero_sib;
        in.vsib_known = &zero_sib;
        in.info = octant_info(depth, leaves.codes[i]);
        in.h_an = &han[i];
        const PredictOut p = model.predict(in);
        int best = 1;
        for (int s = 2; s < 256; ++s)
            if (p.probs[size_t(s)] > p.probs[size_t(best)]) best = s;  // ties keep the smallest symbol
        out.symbols[i] = uint8_t(best);
    }
    for (size_t i = 0; i < leaves.count(); ++i) {
        const uint64_t base = leaves.codes[i] << 3;
        for (int k = 0; k < 8; ++k) {
            if (!(out.symbols[i] & (1u << k))) continue;
            const Vec3d c = tree.cell_center(depth + 1, base | uint64_t(k));
            out.xp.pts.push_back(Vec3f{float(c.x), float(c.y), float(c.z)});
        }
    }
    return out;
}

OffsetField refine_offsets(const Octree& tree, const ModelBundle& bundle) {
    const int depth = tree.depth();
    const RefineModel* rm = bundle.refine(depth);
    if (rm == nullptr) {
        std::string have;
        for (int d : bundle.config().refine_levels) have += (have.empty() ? "" : ",") + std::to_string(d);
        throw ValidationError("no refinement model for depth " + std::to_string(depth) +
                              (have.empty() ? " (bundle has none)" : " (bundle has depths " + have + ")"));
    }
    const ModelConfig& mc = bundle.config().model;
    const OctreeLevel& leaves = tree.level(depth);
    LevelGrid grid = LevelGrid::from_parent_symbols(tree.level(depth - 1), depth - 1);

    OffsetField out;
    out.bound = tree.config().bounds.side / double(uint64_t(1) << (depth + 2));
    out.offsets.resize(leaves.count());
    for (size_t i = 0; i < leaves.count(); ++i) {
        const BinBlock v = neighbor_block(grid, leaves.codes[i], mc.k);
        const std::array<double, 24> raw = rm->raw_offsets(v, octant_info(depth, leaves.codes[i]));
        for (int j = 0; j < 24; ++j) out.offsets[i][size_t(j)] = std::tanh(raw[size_t(j)]) * out.bound;
    }
    return out;
}

PointCloud apply_offsets(const PredictedLeafSet& pred, const OffsetField& off) {
    if (off.offsets.size() != pred.leaf_codes.size()) throw ValidationError("apply_offsets: leaf count mismatch");
    PointCloud out;
    out.pts.reserve(pred.xp.size());
    size_t j = 0;
    for (size_t i = 0; i < pred.leaf_codes.size(); ++i) {
        for (int k = 0; k < 8; ++k) {
            if (!(pred.symbols[i] & (1u << k))) continue;
            const Vec3f& p = pred.xp.pts[j];
            const std::array<double, 24>& o = off.offsets[i];
            out.pts.push_back(Vec3f{float(double(p.x) + o[size_t(3 * k)]), float(double(p.y) + o[size_t(3 * k + 1)]),
                                    float(double(p.z) + o[size_t(3 * k + 2)])});
            ++j;
        }
    }
    if (j != pred.xp.size()) throw InternalError("apply_offsets: point walk out of sync");
    return out;
}

PointCloud reconstruct_cloud(const Octree& tree, const ModelBundle& bundle, RefineMode mode) {
    if (mode == RefineMode::Off) return tree.decode_centers(tree.depth());
    PredictedLeafSet pred = predict_leaf_symbols(tree, bundle);
    if (mode == RefineMode::Predict) return pred.xp;
    const OffsetField off = refine_offsets(tree, bundle);
    return apply_offsets(pred, off);
}

namespace {

struct ChamferGrad {
    double loss = 0.0;
    std::vector<Vec3d> d_test;  // d(loss)/d(test point)
};

// max(CD(test->gt), CD(gt->test)) with the subgradient of the larger branch;
// ties take the forward branch.
ChamferGrad cd_max_with_grad(const PointCloud& test, const PointCloud& gt) {
    NnGrid ggt(gt);
    NnGrid gtest(test);
    ChamferGrad out;
    out.d_test.assign(test.size(), Vec3d{0, 0, 0});

    std::vector<NnGrid::Hit> fwd(test.size());
    double cd_fwd = 0.0;
    for (size_t i = 0; i < test.size(); ++i) {
        fwd[i] = ggt.nearest(test.pts[i]);
        cd_fwd += std::sqrt(fwd[i].d2);
    }
    cd_fwd /= double(test.size());

    std::vector<NnGrid::Hit> bwd(gt.size());
    double cd_bwd = 0.0;
    for (size_t i = 0; i < gt.size(); ++i) {
        bwd[i] = gtest.nearest(gt.pts[i]);
        cd_bwd += std::sqrt(bwd[i].d2);
    }
    cd_bwd /= double(gt.size());

    out.loss = std::max(cd_fwd, cd_bwd);
    if (cd_fwd >= cd_bwd) {
        const double inv = 1.0 / double(test.size());
        for (size_t i = 0; i < test.size(); ++i) {
            const double d = std::sqrt(fwd[i].d2);
            if (d <= 0.0) continue;
            const Vec3f& a = test.pts[i];
            const Vec3f& b = gt.pts[fwd[i].index];
            out.d_test[i].x += inv * (double(a.x) - double(b.x)) / d;
            out.d_test[i].y += inv * (double(a.y) - double(b.y)) / d;
            out.d_test[i].z += inv * (double(a.z) - double(b.z)) / d;
        }
    } else {
        const double inv = 1.0 / double(gt.size());
        for (size_t i = 0; i < gt.size(); ++i) {
            const double d = std::sqrt(bwd[i].d2);
            if (d <= 0.0) continue;
            const size_t j = bwd[i].index;
            const Vec3f& a = test.pts[j];
            const Vec3f& b = gt.pts[i];
            out.d_test[j].x += inv * (double(a.x) - double(b.x)) / d;
            out.d_test[j].y += inv * (double(a.y) - double(b.y)) / d;
            out.d_test[j].z += inv * (double(a.z) - double(b.z)) / d;
        }
    }
    return out;
}

}  // namespace

RefineTrainStats train_refinement(ModelBundle& bundle, int depth, const std::vector<Octree>& gt_trees,
                                  const RefineTrainOptions& opt) {
    if (gt_trees.empty()) throw ValidationError("train_refinement: no trees");
    RefineModel& rm = bundle.add_refine(depth);
    const ModelConfig& mc = bundle.config().model;
    ParamRegistry& reg = rm.params();
    Adam adam;
    adam.lr = opt.lr;
    GradSink sink(reg);

    RefineTrainStats stats;
    for (int epoch = 0; epoch < opt.epochs; ++epoch) {
        double epoch_loss = 0.0;
        for (const Octree& gt : gt_trees) {
            if (gt.depth() != depth + 1)
                throw ValidationError("train_refinement: ground-truth trees must be depth " + std::to_string(depth + 1));
            const Octree tree = gt.truncated(depth);
            const PredictedLeafSet pred = predict_leaf_symbols(tree, bundle);
            const PointCloud xgt = gt.decode_centers(depth + 1);
            const double bound = tree.config().bounds.side / double(uint64_t(1) << (depth + 2));

            LevelGrid grid = LevelGrid::from_parent_symbols(tree.level(depth - 1), depth - 1);
            const OctreeLevel& leaves = tree.level(depth);

            Tape tape;
            std::vector<int> offset_nodes(leaves.count());
            for (size_t i = 0; i < leaves.count(); ++i) {
                const BinBlock v = neighbor_block(grid, leaves.codes[i], mc.k);
                const int raw = rm.forward(tape, v, octant_info(depth, leaves.codes[i]));
                offset_nodes[i] = tape.scale(tape.tanh_act(raw), bound);
            }

            PointCloud xr;
            xr.pts.reserve(pred.xp.size());
            size_t j = 0;
            for (size_t i = 0; i < leaves.count(); ++i) {
                const std::vector<double>& o = tape.val(offset_nodes[i]);
                for (int k = 0; k < 8; ++k) {
                    if (!(pred.symbols[i] & (1u << k))) continue;
                    const Vec3f& p = pred.xp.pts[j++];
                    xr.pts.push_back(Vec3f{float(double(p.x) + o[size_t(3 * k)]),
                                           float(double(p.y) + o[size_t(3 * k + 1)]),
                                           float(double(p.z) + o[size_t(3 * k + 2)])});
                }
            }

            const ChamferGrad cg = cd_max_with_grad(xr, xgt);
            epoch_loss += cg.loss;

            sink.clear();
            j = 0;
            for (size_t i = 0; i < leaves.count(); ++i) {
                std::vector<double> g(24, 0.0);
                bool any = false;
                for (int k = 0; k < 8; ++k) {
                    if (!(pred.symbols[i] & (1u << k))) continue;
                    const Vec3d& d = cg.d_test[j++];
                    g[size_t(3 * k)] = d.x;
                    g[size_t(3 * k + 1)] = d.y;
                    g[size_t(3 * k + 2)] = d.z;
                    any = any || d.x != 0.0 || d.y != 0.0 || d.z != 0.0;
                }
                if (any) tape.seed_vec(offset_nodes[i], g);
            }
            tape.backward(sink);
            reg.zero_grads();
            sink.accumulate_into(reg);
            adam.step(reg);
        }
        epoch_loss /= double(gt_trees.size());
        stats.epoch_loss.push_back(epoch_loss);
        if (opt.log) (*opt.log) << "refine depth " << depth << " epoch " << epoch << ": mean cd_max " << epoch_loss << "\n";
    }
    return stats;
}

}  // namespace pcz
