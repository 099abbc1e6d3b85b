// SPDX-FileCopyrightText: 2026 pcz contributors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "pcz/cli.hpp"
#include "pcz/entropy_model.hpp"
#include "pcz/metrics.hpp"
#include "pcz/pcio.hpp"
#include "pcz/synth.hpp"
#include "test_util.hpp"

using namespace pcz;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(bool(in));
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

// Small-model CLI flags shared by the pipeline tests.
std::vector<std::string> tiny_flags() {
    return {"--k", "5", "--channels", "2", "4", "4", "--strides", "2", "2", "1", "--h-neigh", "8",
            "--h-sib", "8", "--sib-conv-ch", "2", "--d-an", "8", "--embed", "4", "--geo", "8",
            "--header-hidden", "16"};
}

}  // namespace

TEST_CASE("synth: same seed gives byte-identical frames") {
    const std::string d1 = testutil::scratch_dir("cli_synth_a");
    const std::string d2 = testutil::scratch_dir("cli_synth_b");
    for (const std::string& d : {d1, d2}) {
        const int rc = cli_main({"synth", "--out", d, "--scene", "mixed", "--frames", "2", "--points", "500",
                                 "--noise", "0.01", "--seed", "99"});
        REQUIRE(rc == 0);
    }
    CHECK(slurp(d1 + "/frame_0000.ply") == slurp(d2 + "/frame_0000.ply"));
    CHECK(slurp(d1 + "/frame_0001.ply") == slurp(d2 + "/frame_0001.ply"));
    const int rc3 = cli_main({"synth", "--out", d2, "--scene", "mixed", "--frames", "1", "--points", "500",
                              "--noise", "0.01", "--seed", "100"});
    REQUIRE(rc3 == 0);
    CHECK(slurp(d1 + "/frame_0000.ply") != slurp(d2 + "/frame_0000.ply"));
}

TEST_CASE("synth: noiseless plane patches satisfy the quadric fit exactly") {
    SynthParams p;
    p.kind = SceneKind::Plane;
    p.n_points = 200;
    p.noise = 0.0;
    p.corner_markers = false;  // fit the bare patch
    Rng rng(123);
    const PointCloud c = synth_scene(p, rng);
    std::vector<Vec3d> pts;
    for (const Vec3f& q : c.pts) pts.push_back(Vec3d(q));
    const QuadricFit fit = solve_quadratic_lsq(pts);
    // residual is zero up to f32 storage of the samples
    CHECK(quadric_residual(fit.delta, pts) / double(pts.size()) < 1e-9);
}

TEST_CASE("synth smoke: 50k mixed points build at depth 10") {
    SynthParams p;
    p.kind = SceneKind::Mixed;
    p.n_points = 50000;
    p.noise = 0.02;
    Rng rng(7);
    const PointCloud c = synth_scene(p, rng);
    REQUIRE(c.size() == 50000);
    OctreeConfig oc;
    oc.depth = 10;
    oc.bounds = compute_bounds(c, 0.0);
    const Octree t = Octree::build(c, oc);
    CHECK(t.level(10).count() > 1000);
}

TEST_CASE("pipeline: synth, train, encode, decode, eval in-process") {
    const std::string data = testutil::scratch_dir("cli_pipe_data");
    const std::string bundle = testutil::scratch_dir("cli_pipe_bundle");
    const std::string frames = testutil::scratch_dir("cli_pipe_frames");
    const std::string outdir = testutil::scratch_dir("cli_pipe_out");

    REQUIRE(cli_main({"synth", "--out", data, "--scene", "quadric", "--frames", "6", "--points", "400", "--noise",
                      "0.01", "--patch-scale", "0.15", "--seed", "3"}) == 0);

    std::vector<std::string> train_args = {"train", "--data", data,       "--out",    bundle, "--depth", "4",
                                           "--epochs", "2",   "--lr",     "1e-3",     "--seed", "5",
                                           "--refine-depth", "4", "--refine-epochs", "1"};
    for (const std::string& f : tiny_flags()) train_args.push_back(f);
    REQUIRE(cli_main(train_args) == 0);
    CHECK(fs::exists(bundle + "/manifest.txt"));
    CHECK(fs::exists(bundle + "/level_04.ckpt"));
    CHECK(fs::exists(bundle + "/refine_04.ckpt"));

    REQUIRE(cli_main({"encode", "--bundle", bundle, "--depth", "4", "--out", frames, "--report",
                      outdir + "/rates.csv", data + "/frame_0000.ply", data + "/frame_0001.ply"}) == 0);
    CHECK(fs::exists(frames + "/frame_0000.pcz"));
    CHECK(slurp(outdir + "/rates.csv").find("bpp") != std::string::npos);

    REQUIRE(cli_main({"decode", "--bundle", bundle, "--out", outdir + "/rec.ply", frames + "/frame_0000.pcz"}) == 0);
    REQUIRE(cli_main({"decode", "--bundle", bundle, "--out", outdir + "/rec_refined.ply", "--refine", "full",
                      frames + "/frame_0000.pcz"}) == 0);

    // decoded centers must match the encoder's own tree centers exactly: F1=1
    const PointCloud orig = load_points(data + "/frame_0000.ply");
    OctreeConfig oc;
    oc.depth = 4;
    oc.bounds = compute_bounds(orig, 0.0);
    const Octree tree = Octree::build(orig, oc);
    const PointCloud rec = load_points(outdir + "/rec.ply");
    CHECK(f1_score(tree.decode_centers(4), rec) == 1.0);

    // refined cloud differs (two-step) but stays a valid cloud
    const PointCloud refined = load_points(outdir + "/rec_refined.ply");
    CHECK(refined.size() > 0);

    REQUIRE(cli_main({"eval", "--ref", data + "/frame_0000.ply", "--test", outdir + "/rec.ply", "--out",
                      outdir + "/metrics.txt", "--csv", outdir + "/metrics.csv"}) == 0);
    const std::string kv = slurp(outdir + "/metrics.txt");
    CHECK(kv.find("psnr_point_db=") != std::string::npos);
    CHECK(kv.find("cd_max=") != std::string::npos);

    REQUIRE(cli_main({"inspect", frames + "/frame_0000.pcz", "--bundle", bundle}) == 0);
    REQUIRE(cli_main({"eval", "--js-corpus", data, "--js-depth", "4", "--out", outdir + "/js.csv"}) == 0);
    CHECK(slurp(outdir + "/js.csv").find(',') != std::string::npos);
}

TEST_CASE("cli: decode with the wrong bundle fails with exit code 1") {
    const std::string data = testutil::scratch_dir("cli_wrong_data");
    const std::string b1 = testutil::scratch_dir("cli_wrong_b1");
    const std::string b2 = testutil::scratch_dir("cli_wrong_b2");
    const std::string frames = testutil::scratch_dir("cli_wrong_frames");
    REQUIRE(cli_main({"synth", "--out", data, "--scene", "plane", "--frames", "2", "--points", "200", "--seed",
                      "8"}) == 0);
    for (const auto& [dir, seed] : {std::pair{b1, "1"}, std::pair{b2, "2"}}) {
        std::vector<std::string> args = {"train", "--data", data, "--out", dir,   "--depth", "3",
                                         "--epochs", "1", "--lr", "1e-3", "--seed", seed};
        for (const std::string& f : tiny_flags()) args.push_back(f);
        REQUIRE(cli_main(args) == 0);
    }
    REQUIRE(cli_main({"encode", "--bundle", b1, "--depth", "3", "--out", frames, data + "/frame_0000.ply"}) == 0);
    CHECK(cli_main({"decode", "--bundle", b2, "--out", frames + "/x.ply", frames + "/frame_0000.pcz"}) == 1);
}

TEST_CASE("cli: depth sweep 9..12 emits four rate points per frame") {
    const std::string data = testutil::scratch_dir("cli_sweep_data");
    const std::string bundle = testutil::scratch_dir("cli_sweep_bundle");
    const std::string out = testutil::scratch_dir("cli_sweep_out");
    REQUIRE(cli_main({"synth", "--out", data, "--scene", "quadric", "--frames", "2", "--points", "400",
                      "--patch-scale", "0.1", "--seed", "31"}) == 0);
    std::vector<std::string> targs = {"train", "--data", data, "--out", bundle, "--depth", "11",
                                      "--epochs", "1", "--lr", "1e-3", "--seed", "2"};
    for (const std::string& f : tiny_flags()) targs.push_back(f);
    REQUIRE(cli_main(targs) == 0);
    size_t rows = 0;
    for (int depth : {9, 10, 11, 12}) {
        const std::string csv = out + "/rates_" + std::to_string(depth) + ".csv";
        REQUIRE(cli_main({"encode", "--bundle", bundle, "--depth", std::to_string(depth), "--out",
                          out + "/d" + std::to_string(depth), "--report", csv, data + "/frame_0000.ply"}) == 0);
        const std::string body = slurp(csv);
        rows += size_t(std::count(body.begin(), body.end(), '\n')) - 1;  // minus header
    }
    CHECK(rows == 4);
}

TEST_CASE("cli: exit codes for missing files and bad arguments") {
    CHECK(cli_main({"encode", "--bundle", "/no/such/bundle", "--depth", "4", "--out", "/tmp",
                    "/no/such/file.ply"}) == 2);
    CHECK(cli_main({"decode"}) == 1);                 // missing required options
    CHECK(cli_main({"no-such-subcommand"}) == 1);
    CHECK(cli_main({"eval"}) == 1);                   // neither clouds nor corpus given
    CHECK(cli_main({"--help"}) == 0);
}

TEST_CASE("cli: separate encode and decode processes round-trip losslessly") {
#ifndef PCZ_BIN_PATH
    FAIL("PCZ_BIN_PATH not defined");
#else
    const std::string data = testutil::scratch_dir("cli_proc_data");
    const std::string bundle = testutil::scratch_dir("cli_proc_bundle");
    const std::string frames = testutil::scratch_dir("cli_proc_frames");
    REQUIRE(cli_main({"synth", "--out", data, "--scene", "boxes", "--frames", "1", "--points", "600", "--seed",
                      "21"}) == 0);
    std::vector<std::string> targs = {"train", "--data", data, "--out", bundle, "--depth", "4",
                                      "--epochs", "1", "--lr", "1e-3", "--seed", "6"};
    for (const std::string& f : tiny_flags()) targs.push_back(f);
    REQUIRE(cli_main(targs) == 0);

    const std::string bin = PCZ_BIN_PATH;
    auto sh = [&](const std::string& cmd) { return std::system((cmd + " > /dev/null 2>&1").c_str()); };
    REQUIRE(sh(bin + " encode --bundle " + bundle + " --depth 4 --out " + frames + " " + data + "/frame_0000.ply") == 0);
    REQUIRE(sh(bin + " decode --bundle " + bundle + " --out " + frames + "/rec.ply " + frames + "/frame_0000.pcz") == 0);

    const PointCloud orig = load_points(data + "/frame_0000.ply");
    OctreeConfig oc;
    oc.depth = 4;
    oc.bounds = compute_bounds(orig, 0.0);
    const Octree tree = Octree::build(orig, oc);
    const PointCloud rec = load_points(frames + "/rec.ply");
    CHECK(f1_score(tree.decode_centers(4), rec) == 1.0);
#endif
}
