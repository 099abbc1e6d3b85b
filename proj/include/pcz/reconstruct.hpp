// SPDX-FileCopyrightText: 2026 pcz contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <iosfwd>
#include <vector>

#include "pcz/entropy_model.hpp"

namespace pcz {

// Two-step decoder-side reconstruction: predict leaf children with the
// deepest entropy model (zero sibling context, no bits read), then add
// learned per-child offsets bounded to half a child cell. Frame bytes are
// untouched either way.

// Ancestor feature of every leaf, from the frozen level depth-1 pass (the
// root feature when depth == 1).
std::vector<std::vector<double>> leaf_ancestors(const Octree& tree, const ModelBundle& bundle);

struct PredictedLeafSet {
    int child_level = 0;              // tree depth + 1
    std::vector<uint64_t> leaf_codes;
    std::vector<uint8_t> symbols;     // argmax over 1..255, ties to the smallest
    PointCloud xp;                    // predicted child centers, leaf-major then child-ascending
};

PredictedLeafSet predict_leaf_symbols(const Octree& tree, const ModelBundle& bundle);

struct OffsetField {
    double bound = 0.0;  // per-axis clamp: side / 2^(depth+2), via tanh
    std::vector<std::array<double, 24>> offsets;  // per leaf: 8 children x (dx,dy,dz)
};

OffsetField refine_offsets(const Octree& tree, const ModelBundle& bundle);

// x^r = x^p + offsets gathered at set symbol bits; unset bits contribute no
// point and their offsets are ignored.
PointCloud apply_offsets(const PredictedLeafSet& pred, const OffsetField& off);

enum class RefineMode { Off, Predict, Full };
PointCloud reconstruct_cloud(const Octree& tree, const ModelBundle& bundle, RefineMode mode);

struct RefineTrainOptions {
    int epochs = 2;
    double lr = 1e-4;
    uint64_t seed = 1;
    std::ostream* log = nullptr;
};

struct RefineTrainStats {
    std::vector<double> epoch_loss;  // mean CD_max over frames, metres
};

// Entropy models stay frozen; only the refinement model for `depth` is
// optimized, against ground-truth trees built one level deeper.
RefineTrainStats train_refinement(ModelBundle& bundle, int depth, const std::vector<Octree>& gt_trees,
                                  const RefineTrainOptions& opt);

}  // namespace pcz
