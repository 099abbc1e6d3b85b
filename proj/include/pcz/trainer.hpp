// SPDX-FileCopyrightText: 2026 pcz contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <vector>

#include "pcz/entropy_model.hpp"

namespace pcz {

// Teacher-forced conditioning inputs for one octant, extracted once from a
// ground-truth tree. Sibling blocks hold true earlier-sibling symbols, so
// training order within a batch does not matter.
struct CtxSample {
    BinBlock v;
    BinBlock vsib;
    BinBlock vsib_known;
    OctantInfo info;
    uint8_t symbol = 0;
    uint32_t parent = UINT32_MAX;  // sample index one level up; UINT32_MAX for root children
    std::vector<double> h_an;      // filled from the frozen parent model before training
};

struct LevelDataset {
    int level = 0;
    std::vector<CtxSample> samples;
};

struct CorpusDataset {
    int max_level = 0;
    std::vector<LevelDataset> levels;  // index by level, [0] unused

    // Trees must be built one level deeper than max_level so every trained
    // level has ground-truth symbols.
    static CorpusDataset build(const std::vector<Octree>& trees, const ModelConfig& cfg, int max_level);
};

// Computes the ancestor feature of every level-l sample from the (frozen)
// level l-1 model. Level 1 is skipped: its ancestor input is the root pass,
// which runs inside the level-1 model itself.
void fill_ancestors(CorpusDataset& ds, int level, const LevelModel& parent_model);

struct TrainOptions {
    int epochs = 20;
    double lr = 1e-4;
    int batch = 32;
    int threads = 1;
    uint64_t seed = 1;
    std::ostream* log = nullptr;
};

struct TrainStats {
    std::vector<double> epoch_loss;  // mean cross-entropy (nats) + lambda * surface
    double best_loss = 0.0;
    int best_epoch = -1;
    bool aborted = false;  // divergence; model restored to last finite epoch
};

// Per-level optimization; gradients never cross levels. The model is left at
// its best epoch.
TrainStats train_level(LevelModel& model, const LevelDataset& ds, const TrainOptions& opt);

struct BundleTrainReport {
    std::vector<TrainStats> per_level;  // index by level, [0] unused
};

// Sequential top-down training; level l's ancestor features come from the
// already-trained level l-1.
BundleTrainReport train_bundle(ModelBundle& bundle, CorpusDataset& ds, const TrainOptions& opt);

}  // namespace pcz
