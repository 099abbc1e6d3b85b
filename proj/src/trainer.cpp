// SPDX-FileCopyrightText: 2026 pcz contributors
// SPDX-License-Identifier: Apache-2.0

#include "pcz/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <thread>

namespace pcz {

CorpusDataset CorpusDataset::build(const std::vector<Octree>& trees, const ModelConfig& cfg, int max_level) {
    if (max_level < 1) throw ValidationError("dataset: max_level must be >= 1");
    CorpusDataset ds;
    ds.max_level = max_level;
    ds.levels.resize(size_t(max_level) + 1);
    for (int l = 1; l <= max_level; ++l) ds.levels[size_t(l)].level = l;

    for (const Octree& tree : trees) {
        if (tree.depth() < max_level + 1)
            throw ValidationError("dataset: tree depth " + std::to_string(tree.depth()) +
                                  " cannot label level " + std::to_string(max_level) +
                                  " (need depth >= " + std::to_string(max_level + 1) + ")");
        std::vector<uint32_t> parent_base(size_t(max_level) + 1, 0);
        for (int l = 1; l <= max_level; ++l) parent_base[size_t(l)] = uint32_t(ds.levels[size_t(l)].samples.size());

        for (int l = 1; l <= max_level; ++l) {
            const OctreeLevel& parent = tree.level(l - 1);
            const OctreeLevel& cur = tree.level(l);
            LevelGrid grid = LevelGrid::from_parent_symbols(parent, l - 1);
            std::vector<CtxSample>& out = ds.levels[size_t(l)].samples;
            size_t ci = 0;
            for (size_t pi = 0; pi < parent.count(); ++pi) {
                SiblingAccum sib;
                if (cfg.sibling_known_mask) sib.set_parent_symbol(parent.symbols[pi]);
                for (int k = 0; k < 8; ++k) {
                    if (!(parent.symbols[pi] & (1u << k))) continue;
                    const uint64_t code = parent.codes[pi] << 3 | uint64_t(k);
                    CtxSample s;
                    s.v = neighbor_block(grid, code, cfg.k);
                    s.vsib = sib.occupancy();
                    if (cfg.sibling_known_mask) s.vsib_known = sib.known();
                    s.info = octant_info(l, code);
                    s.symbol = cur.symbols[ci];
                    s.parent = l == 1 ? UINT32_MAX : parent_base[size_t(l) - 1] + uint32_t(pi);
                    out.push_back(std::move(s));
                    sib.add_sibling(k, cur.symbols[ci]);
                    ++ci;
                }
            }
            if (ci != cur.count()) throw InternalError("dataset build out of sync");
        }
    }
    return ds;
}

void fill_ancestors(CorpusDataset& ds, int level, const LevelModel& parent_model) {
    if (level < 2 || level > ds.max_level) throw ValidationError("fill_ancestors: level out of range");
    const std::vector<CtxSample>& parents = ds.levels[size_t(level) - 1].samples;
    std::vector<std::vector<double>> h_child(parents.size());
    for (size_t i = 0; i < parents.size(); ++i)
        h_child[i] = parent_model.ancestor_for_children(parents[i].v, parents[i].info);
    for (CtxSample& s : ds.levels[size_t(level)].samples) {
        if (s.parent == UINT32_MAX || s.parent >= parents.size()) throw InternalError("bad parent index in dataset");
        s.h_an = h_child[s.parent];
    }
}

namespace {

struct BatchResult {
    double loss_sum = 0.0;
    uint64_t count = 0;
};

BatchResult run_batch_slice(const LevelModel& model, const LevelDataset& ds, const std::vector<uint32_t>& order,
                            size_t begin, size_t end, size_t stride, size_t offset, double inv_batch, GradSink& sink) {
    BatchResult res;
    const double lambda = model.config().lambda;
    Tape tape;
    for (size_t j = begin + offset; j < end; j += stride) {
        const CtxSample& s = ds.samples[order[j]];
        tape.reset();
        CtxInputs in;
        in.v = &s.v;
        in.vsib = &s.vsib;
        in.vsib_known = &s.vsib_known;
        in.info = s.info;
        in.h_an = s.h_an.empty() ? nullptr : &s.h_an;
        const LevelModel::FwdNodes f = model.forward(tape, in, s.symbol);
        double loss = tape.val(f.ce)[0];
        tape.seed(f.ce, inv_batch);
        if (f.surface >= 0) {
            loss += lambda * tape.val(f.surface)[0];
            tape.seed(f.surface, lambda * inv_batch);
        }
        tape.backward(sink);
        res.loss_sum += loss;
        res.count += 1;
    }
    return res;
}

}  // namespace

TrainStats train_level(LevelModel& model, const LevelDataset& ds, const TrainOptions& opt) {
    if (ds.samples.empty()) throw ValidationError("train_level: empty dataset for level " + std::to_string(ds.level));
    const size_t n = ds.samples.size();
    const int threads = std::max(1, opt.threads);
    ParamRegistry& reg = model.params();

    Adam adam;
    adam.lr = opt.lr;
    std::vector<GradSink> sinks;
    sinks.reserve(size_t(threads));
    for (int t = 0; t < threads; ++t) sinks.emplace_back(reg);

    TrainStats stats;
    std::vector<std::vector<float>> best = reg.snapshot();
    std::vector<std::vector<float>> last_finite = best;

    std::vector<uint32_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = uint32_t(i);

    for (int epoch = 0; epoch < opt.epochs; ++epoch) {
        Rng shuffle_rng = Rng(opt.seed).fork(uint64_t(1000 * ds.level + epoch));
        for (size_t i = n; i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.below(i)]);

        double epoch_loss = 0.0;
        bool finite = true;
        for (size_t begin = 0; begin < n && finite; begin += size_t(opt.batch)) {
            const size_t end = std::min(n, begin + size_t(opt.batch));
            const double inv_batch = 1.0 / double(end - begin);
            for (GradSink& s : sinks) s.clear();

            std::vector<BatchResult> results(static_cast<size_t>(threads));
            if (threads == 1) {
                results[0] = run_batch_slice(model, ds, order, begin, end, 1, 0, inv_batch, sinks[0]);
            } else {
                std::vector<std::thread> pool;
                pool.reserve(size_t(threads));
                for (int t = 0; t < threads; ++t)
                    pool.emplace_back([&, t] {
                        results[size_t(t)] = run_batch_slice(model, ds, order, begin, end, size_t(threads), size_t(t),
                                                             inv_batch, sinks[size_t(t)]);
                    });
                for (std::thread& th : pool) th.join();
            }
            reg.zero_grads();
            for (GradSink& s : sinks) s.accumulate_into(reg);  // fixed thread order
            double batch_loss = 0.0;
            for (const BatchResult& r : results) batch_loss += r.loss_sum;
            if (!std::isfinite(batch_loss)) {
                finite = false;
                break;
            }
            epoch_loss += batch_loss;
            adam.step(reg);
        }
        if (!finite) {
            reg.restore(last_finite);
            stats.aborted = true;
            if (opt.log) (*opt.log) << "level " << ds.level << ": diverged at epoch " << epoch << ", restored\n";
            break;
        }
        epoch_loss /= double(n);
        stats.epoch_loss.push_back(epoch_loss);
        last_finite = reg.snapshot();
        if (stats.best_epoch < 0 || epoch_loss < stats.best_loss) {
            stats.best_loss = epoch_loss;
            stats.best_epoch = epoch;
            best = last_finite;
        }
        if (opt.log)
            (*opt.log) << "level " << ds.level << " epoch " << epoch << ": loss " << epoch_loss << " ("
                       << epoch_loss / std::log(2.0) << " bits/sym incl. surface term)\n";
    }
    reg.restore(best);
    return stats;
}

BundleTrainReport train_bundle(ModelBundle& bundle, CorpusDataset& ds, const TrainOptions& opt) {
    if (ds.max_level < bundle.max_level())
        throw ValidationError("dataset covers levels 1.." + std::to_string(ds.max_level) + ", bundle needs 1.." +
                              std::to_string(bundle.max_level()));
    BundleTrainReport report;
    report.per_level.resize(size_t(bundle.max_level()) + 1);
    for (int l = 1; l <= bundle.max_level(); ++l) {
        if (l >= 2) fill_ancestors(ds, l, bundle.level(l - 1));
        report.per_level[size_t(l)] = train_level(bundle.level(l), ds.levels[size_t(l)], opt);
    }
    return report;
}

}  // namespace pcz
