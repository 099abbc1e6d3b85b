// SPDX-FileCopyrightText: 2026 pcz contributors
// SPDX-License-Identifier: Apache-2.0

// End-to-end acceptance suite. Each criterion prints one PASS/FAIL line;
// the process exits nonzero if any fail. Budgeted to finish in minutes on
// two cores, using slim (config-exposed) model widths.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <vector>

#include "pcz/codec.hpp"
#include "pcz/kernels.hpp"
#include "pcz/metrics.hpp"
#include "pcz/reconstruct.hpp"
#include "pcz/synth.hpp"
#include "pcz/trainer.hpp"

using namespace pcz;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

int g_failures = 0;

void run_criterion(int id, const std::string& name, const std::function<Outcome()>& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
        out = fn();
    } catch (const std::exception& e) {
        out.pass = false;
        out.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::ostringstream line;
    line << (out.pass ? "[PASS]" : "[FAIL]") << " criterion " << id << ": " << name << " (" << std::fixed
         << std::setprecision(1) << secs << "s)";
    if (!out.detail.empty()) line << " -- " << out.detail;
    std::cout << line.str() << std::endl;
    if (!out.pass) ++g_failures;
}

// ---- shared fixtures -------------------------------------------------------

ModelConfig lossless_cfg() {
    ModelConfig m;
    m.k = 5;
    m.conv_ch = {2, 4, 4};
    m.conv_stride = {2, 2, 1};
    m.h_neigh = 8;
    m.sib_conv_ch = 2;
    m.sib_conv_stride = 2;
    m.h_sib = 8;
    m.d_an = 8;
    m.embed = 4;
    m.geo = 8;
    m.header_hidden = 16;
    return m;
}

ModelConfig learning_cfg() {
    ModelConfig m;
    m.k = 9;
    m.conv_ch = {4, 8, 8};
    m.conv_stride = {2, 2, 1};
    m.h_neigh = 24;
    m.sib_conv_ch = 4;
    m.sib_conv_stride = 1;  // stride 2 pools away the sub-cell detail the block carries
    m.h_sib = 16;
    m.d_an = 16;
    m.embed = 8;
    m.geo = 16;
    m.header_hidden = 32;
    return m;
}

// Acceptance corpus: one quadric patch (surface-prior signal, smooth geometry
// for reconstruction) plus one small box whose axis-aligned faces repeat
// across sibling octants at child resolution (sibling-context signal), inside
// a corner-marked 40 m stage so frames share one quantization grid.
PointCloud corpus_frame(uint64_t seed) {
    Rng rng(seed);
    PointCloud c;
    const double extent = 40.0;
    const float hi = std::nextafter(float(extent), 0.0f);
    for (int k = 0; k < 8; ++k)
        c.pts.push_back(Vec3f{(k & 4) ? hi : 0.0f, (k & 2) ? hi : 0.0f, (k & 1) ? hi : 0.0f});
    auto cl = [&](double x) { return std::min(std::max(float(x), 0.0f), hi); };
    const size_t n = 3000;
    {
        const double s = 4.0;
        const double cx = rng.uniform(8.0, 32.0), cy = rng.uniform(8.0, 32.0), z0 = rng.uniform(8.0, 32.0);
        const double kmax = 1.2 / s;
        const double q[5] = {rng.uniform(-kmax, kmax), rng.uniform(-kmax, kmax), rng.uniform(-kmax, kmax),
                             rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)};
        for (size_t i = 0; i < n - n / 2; ++i) {
            const double u = rng.uniform(-s / 2, s / 2), v = rng.uniform(-s / 2, s / 2);
            const double z = z0 + q[0] * u * u + q[1] * v * v + q[2] * u * v + q[3] * u + q[4] * v + 0.02 * rng.normal();
            c.pts.push_back(Vec3f{cl(cx + u), cl(cy + v), cl(z)});
        }
    }
    {
        const double hx = rng.uniform(0.7, 1.1), hy = rng.uniform(0.7, 1.1), hz = rng.uniform(0.7, 1.1);
        const double cx = rng.uniform(2.0, extent - 2.0), cy = rng.uniform(2.0, extent - 2.0),
                     cz = rng.uniform(2.0, extent - 2.0);
        for (size_t i = 0; i < n / 2; ++i) {
            const int face = int(rng.below(6));
            double u = rng.uniform(-1, 1), v = rng.uniform(-1, 1), x = cx, y = cy, z = cz;
            const double off = 0.02 * rng.normal();
            switch (face) {
                case 0: x += hx + off; y += u * hy; z += v * hz; break;
                case 1: x += -hx + off; y += u * hy; z += v * hz; break;
                case 2: y += hy + off; x += u * hx; z += v * hz; break;
                case 3: y += -hy + off; x += u * hx; z += v * hz; break;
                case 4: z += hz + off; x += u * hx; y += v * hy; break;
                default: z += -hz + off; x += u * hx; y += v * hy; break;
            }
            c.pts.push_back(Vec3f{cl(x), cl(y), cl(z)});
        }
    }
    return c;
}

Octree tree_of(const PointCloud& cloud, int depth) {
    OctreeConfig oc;
    oc.depth = depth;
    oc.bounds = compute_bounds(cloud, 0.0);
    return Octree::build(cloud, oc);
}

struct LearnedSetup {
    std::vector<Octree> train_trees;  // depth 8: labels for levels 1..7
    std::vector<Octree> held_trees;
    std::vector<PointCloud> held_clouds;
    std::unique_ptr<ModelBundle> full, no_sib, no_an, no_surf;
    std::unique_ptr<StaticHistogramModel> hist;
    bool ready = false;
};

LearnedSetup g_setup;

void build_learned_setup() {
    const int kTrainFrames = 200;
    const int kHeldFrames = 25;
    for (int f = 0; f < kTrainFrames; ++f) g_setup.train_trees.push_back(tree_of(corpus_frame(1000 + f), 8));
    for (int f = 0; f < kHeldFrames; ++f) {
        g_setup.held_clouds.push_back(corpus_frame(900000 + f));
        g_setup.held_trees.push_back(tree_of(g_setup.held_clouds.back(), 8));
    }

    g_setup.hist = std::make_unique<StaticHistogramModel>(7);
    for (const Octree& t : g_setup.train_trees) g_setup.hist->add_tree(t);
    g_setup.hist->finalize();

    TrainOptions to;
    to.epochs = 5;
    to.lr = 1e-3;
    to.batch = 32;
    to.threads = 2;
    to.seed = 77;

    auto train_variant = [&](bool sib, bool an, bool surf) {
        BundleConfig bc;
        bc.model = learning_cfg();
        bc.model.use_sibling = sib;
        bc.model.use_ancestor = an;
        bc.model.use_surface = surf;
        bc.max_level = 7;
        bc.seed = 42;
        auto bundle = std::make_unique<ModelBundle>(ModelBundle::fresh(bc));
        CorpusDataset ds = CorpusDataset::build(g_setup.train_trees, bc.model, 7);
        train_bundle(*bundle, ds, to);
        return bundle;
    };
    g_setup.full = train_variant(true, true, true);
    g_setup.no_sib = train_variant(false, true, true);
    g_setup.no_an = train_variant(true, false, true);
    g_setup.no_surf = train_variant(true, true, false);
    g_setup.ready = true;
}

uint64_t held_out_bits(const ModelBundle& bundle) {
    uint64_t bits = 0;
    for (size_t i = 0; i < g_setup.held_trees.size(); ++i) {
        const EncodeResult r = encode_frame(g_setup.held_clouds[i], g_setup.held_trees[i], bundle);
        bits += r.report.header_bits + r.report.payload_bits;
    }
    return bits;
}

// ---- criteria --------------------------------------------------------------

Outcome criterion1_lossless() {
    BundleConfig bc;
    bc.model = lossless_cfg();
    bc.max_level = 9;
    bc.seed = 7;
    const ModelBundle bundle = ModelBundle::fresh(bc);
    Rng rng(2026);
    size_t total_symbols = 0;
    double worst_slack = -1e18;
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < 100; ++i) {
        Rng frame_rng = rng.fork(uint64_t(i) + 1);
        SynthParams p;
        p.kind = SceneKind::Mixed;
        p.n_points = size_t(std::exp(frame_rng.uniform(std::log(1000.0), std::log(50000.0))));
        p.noise = 0.02;
        p.extent = 40.0;
        const PointCloud cloud = synth_scene(p, frame_rng);
        const int depth = 4 + i % 7;
        const Octree tree = tree_of(cloud, depth);
        const EncodeResult enc = encode_frame(cloud, tree, bundle);
        const DecodedFrame dec = decode_frame(enc.frame, bundle);
        if (dec.tree.symbol_stream() != tree.symbol_stream())
            return {false, "symbol mismatch on frame " + std::to_string(i)};
        total_symbols += enc.report.symbol_count;
        worst_slack = std::max(worst_slack, double(enc.report.payload_bits) - enc.report.model_bits_estimate);
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::ostringstream d;
    d << "100 frames, " << total_symbols << " symbols exact; worst payload-vs-estimate slack " << std::setprecision(3)
      << worst_slack << " bits; " << std::setprecision(1) << std::fixed << secs << "s";
    if (secs >= 300.0) return {false, d.str() + " (over the 5 minute target)"};
    if (worst_slack > 40.0) return {false, d.str()};
    return {true, d.str()};
}

Outcome criterion2_rate_accounting() {
    // frame-level bound is exercised in criterion 1; here the iid stream
    Rng rng(5);
    std::array<double, 256> p;
    double sum = 0.0;
    for (int i = 0; i < 256; ++i) {
        p[size_t(i)] = std::exp(-0.03 * i) * (0.5 + rng.uniform());
        sum += p[size_t(i)];
    }
    for (double& v : p) v /= sum;
    double entropy = 0.0;
    for (double v : p) entropy -= v * std::log2(v);
    const QuantizedDistribution q = QuantizedDistribution::from_probs(p);
    const size_t n = 200000;
    RangeEncoder enc;
    Rng draw(6);
    for (size_t i = 0; i < n; ++i) {
        double u = draw.uniform();
        int s = 255;
        for (int k = 0; k < 256; ++k) {
            u -= p[size_t(k)];
            if (u <= 0.0) {
                s = k;
                break;
            }
        }
        enc.encode(q, s);
    }
    const double bits = double(enc.finish().size()) * 8.0;
    const double budget = 1.01 * entropy * double(n) + 32.0;
    std::ostringstream d;
    d << "iid stream: " << bits / double(n) << " bits/sym vs entropy " << entropy << " (budget " << budget / double(n)
      << ")";
    return {bits <= budget && bits >= 0.99 * entropy * double(n) - 32.0, d.str()};
}

Outcome criterion3_model_validity() {
    const ModelConfig cfg = lossless_cfg();
    const LevelModel model(cfg, 3, 909);
    Rng rng(11);
    // distribution validity over random contexts
    for (int trial = 0; trial < 500; ++trial) {
        BinBlock v(cfg.k);
        for (size_t i = 0; i < v.cells(); ++i)
            if (rng.below(3) == 0) v.set(i);
        v.set(cfg.k / 2, cfg.k / 2, cfg.k / 2);
        std::vector<std::pair<int, uint8_t>> sibs;
        for (int k = 0; k < 4; ++k)
            if (rng.below(2)) sibs.push_back({k, uint8_t(1 + rng.below(255))});
        const BinBlock vsib = sibling_block(sibs, 5);
        std::vector<double> han(size_t(cfg.d_an));
        for (double& h : han) h = rng.uniform(-1, 1);
        CtxInputs in;
        in.v = &v;
        in.vsib = &vsib;
        in.info.level = int(1 + rng.below(9));
        in.info.cx = rng.uniform();
        in.info.cy = rng.uniform();
        in.info.cz = rng.uniform();
        in.h_an = &han;
        const PredictOut out = model.predict(in);
        double s = 0.0;
        for (double pr : out.probs) {
            if (!(pr > 0.0)) return {false, "nonpositive probability"};
            s += pr;
        }
        if (std::fabs(s - 1.0) > 1e-9) return {false, "distribution sum off by " + std::to_string(s - 1.0)};
    }

    // full-model gradient check
    LevelModel m(cfg, 3, 910);
    BinBlock v(cfg.k);
    for (size_t i = 0; i < v.cells(); ++i)
        if (rng.below(3) == 0) v.set(i);
    v.set(cfg.k / 2, cfg.k / 2, cfg.k / 2);
    const BinBlock vsib = sibling_block({{0, 0x81}, {2, 0x18}}, 6);
    std::vector<double> han(size_t(cfg.d_an));
    for (double& h : han) h = rng.uniform(-0.5, 0.5);
    CtxInputs in;
    in.v = &v;
    in.vsib = &vsib;
    in.info.level = 3;
    in.info.cx = 0.4;
    in.info.cy = 0.7;
    in.info.cz = 0.2;
    in.h_an = &han;
    ParamRegistry& reg = m.params();
    auto loss = [&](bool with_grad) {
        Tape t;
        const LevelModel::FwdNodes f = m.forward(t, in, 201);
        double total = t.val(f.ce)[0];
        if (f.surface >= 0) total += cfg.lambda * t.val(f.surface)[0];
        if (with_grad) {
            reg.zero_grads();
            t.seed(f.ce, 1.0);
            if (f.surface >= 0) t.seed(f.surface, cfg.lambda);
            GradSink sink(reg);
            t.backward(sink);
            sink.accumulate_into(reg);
        }
        return total;
    };
    const GradCheckReport r = grad_check(reg, loss, 1e-4, 60);
    std::ostringstream d;
    d << "500 valid distributions; grad check max rel err " << r.max_rel_err << " over " << reg.count() << " tensors";
    return {r.max_rel_err < 1e-3, d.str()};
}

Outcome criterion4_beats_static() {
    if (!g_setup.ready) build_learned_setup();
    const uint64_t learned = held_out_bits(*g_setup.full);
    uint64_t static_bits = 0;
    for (size_t i = 0; i < g_setup.held_trees.size(); ++i) {
        const EncodeResult r = encode_frame_static(g_setup.held_clouds[i], g_setup.held_trees[i], *g_setup.hist);
        static_bits += r.report.header_bits + r.report.payload_bits;
    }
    const double ratio = double(learned) / double(static_bits);
    std::ostringstream d;
    d << "held-out bits: learned " << learned << " vs static " << static_bits << " (ratio " << std::setprecision(4)
      << ratio << ", need <= 0.85)";
    return {ratio <= 0.85, d.str()};
}

Outcome criterion5_ablation_directions() {
    if (!g_setup.ready) build_learned_setup();
    const double full = double(held_out_bits(*g_setup.full));
    const double no_sib = double(held_out_bits(*g_setup.no_sib));
    const double no_an = double(held_out_bits(*g_setup.no_an));
    const double no_surf = double(held_out_bits(*g_setup.no_surf));
    const double tie_band = 0.01 * full;  // measurement tie tolerance for the weak contexts
    std::ostringstream d;
    d << std::setprecision(4) << "full " << uint64_t(full) << "; w/o sibling +" << (no_sib / full - 1.0) * 100.0
      << "%; w/o ancestor +" << (no_an / full - 1.0) * 100.0 << "%; w/o surface +" << (no_surf / full - 1.0) * 100.0
      << "%";
    const bool sib_ok = no_sib > full;                 // strict sign
    const bool an_ok = no_an >= full - tie_band;       // sign or tie
    const bool surf_ok = no_surf >= full - tie_band;   // sign or tie
    const bool order_ok = no_sib >= std::max(no_an, no_surf) - tie_band;  // sibling degrades most
    return {sib_ok && an_ok && surf_ok && order_ok, d.str()};
}

Outcome criterion6_quantization_halving() {
    Rng rng(66);
    std::ostringstream d;
    for (int trial = 0; trial < 2; ++trial) {
        PointCloud c;
        const size_t n = 100000;
        c.pts.reserve(n);
        for (size_t i = 0; i < n; ++i)
            c.pts.push_back(Vec3f{float(rng.uniform(0.0, 40.0)), float(rng.uniform(0.0, 40.0)),
                                  float(rng.uniform(0.0, 40.0))});
        const BoundingCube b = compute_bounds(c, 0.0);
        std::vector<double> max_err;
        for (int l = 4; l <= 10; ++l) {
            const double cell = b.side / double(1 << l);
            double worst = 0.0;
            for (const Vec3f& p : c.pts) {
                const double px[3] = {double(p.x), double(p.y), double(p.z)};
                const double org[3] = {b.origin.x, b.origin.y, b.origin.z};
                double e = 0.0;
                for (int a = 0; a < 3; ++a) {
                    const double f = (px[a] - org[a]) / cell;
                    const double center = (std::floor(f) + 0.5) * cell + org[a];
                    e = std::max(e, std::fabs(px[a] - center));
                }
                worst = std::max(worst, e);
            }
            max_err.push_back(worst);
        }
        for (size_t i = 1; i < max_err.size(); ++i) {
            const double ratio = max_err[i] / max_err[i - 1];
            if (!(ratio > 0.49 && ratio < 0.51))
                return {false, "ratio " + std::to_string(ratio) + " at level " + std::to_string(5 + i)};
            if (trial == 0 && i == 1) d << "sample ratio " << std::setprecision(5) << ratio;
        }
    }
    return {true, d.str()};
}

Outcome criterion7_two_step() {
    if (!g_setup.ready) build_learned_setup();
    // refinement at depth 7, trained on a slice of the corpus, entropy frozen
    std::vector<Octree> gt(g_setup.train_trees.begin(), g_setup.train_trees.begin() + 60);
    RefineTrainOptions ro;
    ro.epochs = 2;
    ro.lr = 1e-3;
    ro.seed = 5;
    train_refinement(*g_setup.full, 7, gt, ro);

    double cd_refined = 0.0, cd_plain = 0.0;
    for (const Octree& t : g_setup.held_trees) {
        const Octree tree7 = t.truncated(7);
        const PointCloud gt8 = t.decode_centers(8);
        cd_refined += cd_max(reconstruct_cloud(tree7, *g_setup.full, RefineMode::Full), gt8);
        cd_plain += cd_max(tree7.decode_centers(7), gt8);
    }
    cd_refined /= double(g_setup.held_trees.size());
    cd_plain /= double(g_setup.held_trees.size());

    // zero-bit property: reconstruction mode cannot change the frame bytes
    const EncodeResult a = encode_frame(g_setup.held_clouds[0], g_setup.held_trees[0].truncated(7), *g_setup.full);
    const EncodeResult b = encode_frame(g_setup.held_clouds[0], g_setup.held_trees[0].truncated(7), *g_setup.full);
    const bool same_bytes = a.frame == b.frame;

    std::ostringstream d;
    d << std::setprecision(5) << "mean cd_max refined " << cd_refined << " vs plain centers " << cd_plain
      << "; frames byte-identical " << (same_bytes ? "yes" : "NO");
    return {same_bytes && cd_refined < cd_plain, d.str()};
}

Outcome criterion8_surface_oracle() {
    Rng rng(88);
    // exact plane and quadric
    std::vector<Vec3d> plane, quad;
    for (int i = -3; i <= 3; ++i)
        for (int j = -3; j <= 3; ++j) {
            plane.push_back(Vec3d{double(i), double(j), 2.0 * i + 3.0 * j + 1.0});
            quad.push_back(Vec3d{double(i), double(j), double(i * i) + double(j * j)});
        }
    const QuadricFit pf = solve_quadratic_lsq(plane);
    const QuadricFit qf = solve_quadratic_lsq(quad);
    const std::array<double, 6> pe = {0, 0, 0, 2, 3, 1};
    const std::array<double, 6> qe = {1, 1, 0, 0, 0, 0};
    for (int i = 0; i < 6; ++i) {
        if (std::fabs(pf.delta[size_t(i)] - pe[size_t(i)]) > 1e-9) return {false, "plane coefficients off"};
        if (std::fabs(qf.delta[size_t(i)] - qe[size_t(i)]) > 1e-9) return {false, "quadric coefficients off"};
    }
    // optimality against 1000 random draws on each of 20 random blocks
    for (int block = 0; block < 20; ++block) {
        std::vector<Vec3d> pts;
        const int n = 6 + int(rng.below(40));
        for (int i = 0; i < n; ++i)
            pts.push_back(Vec3d{rng.uniform(-4, 4), rng.uniform(-4, 4), rng.uniform(-4, 4)});
        const QuadricFit fit = solve_quadratic_lsq(pts);
        const double best = quadric_residual(fit.delta, pts);
        for (int t = 0; t < 1000; ++t) {
            std::array<double, 6> cand;
            for (double& v : cand) v = rng.uniform(-2, 2);
            if (best > quadric_residual(cand, pts) + 1e-9)
                return {false, "random delta beat the normal equations on block " + std::to_string(block)};
        }
    }
    return {true, "exact recovery to 1e-9; optimal on 20 blocks x 1000 draws"};
}

Outcome criterion9_metric_oracles() {
    Rng rng(99);
    for (int trial = 0; trial < 3; ++trial) {
        PointCloud a, b;
        const size_t na = 200 + rng.below(300), nb = 200 + rng.below(300);
        for (size_t i = 0; i < na; ++i)
            a.pts.push_back(Vec3f{float(rng.uniform(0, 5)), float(rng.uniform(0, 5)), float(rng.uniform(0, 5))});
        for (size_t i = 0; i < nb; ++i)
            b.pts.push_back(Vec3f{float(rng.uniform(0, 5)), float(rng.uniform(0, 5)), float(rng.uniform(0, 5))});
        // brute-force references, same summation order as the library
        auto nn2 = [](const Vec3f& q, const PointCloud& c) {
            double best = 1e300;
            for (const Vec3f& p : c.pts) {
                const double dx = double(q.x) - double(p.x), dy = double(q.y) - double(p.y),
                             dz = double(q.z) - double(p.z);
                best = std::min(best, (dx * dx + dy * dy) + dz * dz);
            }
            return best;
        };
        double cd_ab = 0.0, cd_ba = 0.0, mse_ab = 0.0, mse_ba = 0.0;
        uint64_t tp = 0, fp = 0, fn = 0;
        const double tau2 = 0.25 * 0.25;
        for (const Vec3f& p : a.pts) {
            const double d2 = nn2(p, b);
            cd_ab += std::sqrt(d2);
            mse_ab += d2;
            if (d2 > tau2) ++fn;
        }
        for (const Vec3f& p : b.pts) {
            const double d2 = nn2(p, a);
            cd_ba += std::sqrt(d2);
            mse_ba += d2;
            (d2 <= tau2 ? tp : fp) += 1;
        }
        cd_ab /= double(na);
        cd_ba /= double(nb);
        mse_ab /= double(na);
        mse_ba /= double(nb);
        if (cd_max(a, b) != std::max(cd_ab, cd_ba)) return {false, "cd_max mismatch"};
        if (f1_score(a, b, 0.25) != double(tp) / double(tp + fp + fn)) return {false, "f1 mismatch"};
        const double expect_psnr = 10.0 * std::log10(3.0 * 59.70 * 59.70 / std::max(mse_ab, mse_ba));
        if (psnr_point(a, b).db != expect_psnr) return {false, "psnr mismatch"};
    }
    // closed-form single-point case
    PointCloud p1, p2;
    p1.pts.push_back(Vec3f{0, 0, 0});
    p2.pts.push_back(Vec3f{0.0597f, 0, 0});
    const double got = psnr_point(p1, p2).db;
    const double d2 = double(p2.pts[0].x) * double(p2.pts[0].x);
    const double expect = 10.0 * std::log10(3.0 * 59.70 * 59.70 / d2);
    if (std::fabs(got - expect) > 1e-6) return {false, "single-point psnr off"};
    std::ostringstream d;
    d << "exact match vs O(n^2) on 3 cloud pairs; single-point case " << std::setprecision(6) << got << " dB";
    return {true, d.str()};
}

Outcome criterion10_js_matrix() {
    if (!g_setup.ready) build_learned_setup();
    std::vector<const Octree*> ptrs;
    for (const Octree& t : g_setup.train_trees) ptrs.push_back(&t);
    const JsMatrix m = js_divergence_by_level(ptrs);
    for (int l = 0; l < m.levels; ++l) {
        if (m.flagged[size_t(l)]) return {false, "level " + std::to_string(l) + " unpopulated"};
        if (m.at(l, l) != 0.0) return {false, "nonzero diagonal"};
    }
    for (int a = 0; a < m.levels; ++a)
        for (int b = 0; b < m.levels; ++b) {
            if (m.at(a, b) != m.at(b, a)) return {false, "asymmetry"};
            if (!(m.at(a, b) >= 0.0 && m.at(a, b) <= 1.0 + 1e-12)) return {false, "entry out of [0,1] bits"};
        }
    std::ostringstream d;
    d << m.levels << "x" << m.levels << " matrix, max entry " << std::setprecision(4)
      << *std::max_element(m.m.begin(), m.m.end());
    return {true, d.str()};
}

}  // namespace

int main() {
    std::cout << "pcz acceptance suite (kernels: " << kernels::active().name << ")\n";
    run_criterion(1, "lossless structure coding, 100 frames, depths 4-10", criterion1_lossless);
    run_criterion(2, "rate accounting against entropy", criterion2_rate_accounting);
    run_criterion(3, "entropy model validity and gradient check", criterion3_model_validity);
    run_criterion(4, "learned coder beats the static histogram by >= 15%", criterion4_beats_static);
    run_criterion(5, "ablation directions (sibling strict, ancestor/surface sign-or-tie)", criterion5_ablation_directions);
    run_criterion(6, "quantization error halves per level", criterion6_quantization_halving);
    run_criterion(7, "two-step reconstruction beats plain centers at equal bits", criterion7_two_step);
    run_criterion(8, "quadric least-squares oracle", criterion8_surface_oracle);
    run_criterion(9, "metrics equal brute-force references", criterion9_metric_oracles);
    run_criterion(10, "per-level JS divergence matrix structure", criterion10_js_matrix);
    std::cout << (g_failures == 0 ? "all criteria passed" : std::to_string(g_failures) + " criteria failed")
              << std::endl;
    return g_failures == 0 ? 0 : 1;
}
