// SPDX-FileCopyrightText: 2026 pcz contributors
// SPDX-License-Identifier: Apache-2.0

#include "pcz/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "pcz/codec.hpp"
#include "pcz/metrics.hpp"
#include "pcz/reconstruct.hpp"
#include "pcz/synth.hpp"
#include "pcz/trainer.hpp"

namespace pcz {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> list_cloud_files(const std::string& dir) {
    if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir);
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        const std::string ext = e.path().extension().string();
        if (ext == ".ply" || ext == ".xyz" || ext == ".bin") files.push_back(e.path().string());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw ValidationError("no .ply/.xyz/.bin files in " + dir);
    return files;
}

std::vector<uint8_t> read_frame_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    in.seekg(0, std::ios::end);
    std::vector<uint8_t> bytes(size_t(in.tellg()));
    in.seekg(0);
    in.read(reinterpret_cast<char*>(bytes.data()), std::streamsize(bytes.size()));
    return bytes;
}

void write_bytes(const std::string& path, const std::vector<uint8_t>& bytes) {
    fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!out) throw IoError("write failed: " + path);
}

void write_text(const std::string& path, const std::string& text) {
    fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << text;
}

struct ModelFlags {
    int k = 9;
    std::vector<int> channels = {16, 32, 64};
    std::vector<int> strides = {1, 2, 1};
    int h_neigh = 64;
    int h_sib = 32;
    int sib_conv_ch = 16;
    int d_an = 32;
    int embed = 16;
    int geo = 32;
    int header_hidden = 128;
    double lambda = 0.2;
    bool ablate_sibling = false;
    bool ablate_ancestor = false;
    bool ablate_surface = false;
    bool sibling_known_mask = false;

    void attach(CLI::App* cmd) {
        cmd->add_option("--k", k, "neighbor window side (odd)");
        cmd->add_option("--channels", channels, "conv trunk channels (3 values)")->expected(3);
        cmd->add_option("--strides", strides, "conv trunk strides (3 values)")->expected(3);
        cmd->add_option("--h-neigh", h_neigh, "neighbor feature width");
        cmd->add_option("--h-sib", h_sib, "sibling feature width");
        cmd->add_option("--sib-conv-ch", sib_conv_ch, "sibling conv channels");
        cmd->add_option("--d-an", d_an, "ancestor feature width");
        cmd->add_option("--embed", embed, "octant info embedding width");
        cmd->add_option("--geo", geo, "surface feature width");
        cmd->add_option("--header-hidden", header_hidden, "header MLP hidden width");
        cmd->add_option("--lambda", lambda, "surface loss weight");
        cmd->add_flag("--ablate-sibling", ablate_sibling, "zero the sibling context");
        cmd->add_flag("--ablate-ancestor", ablate_ancestor, "zero the ancestor context");
        cmd->add_flag("--ablate-surface", ablate_surface, "drop the surface prior and loss");
        cmd->add_flag("--sibling-known-mask", sibling_known_mask, "add a known-cells channel to the sibling block");
    }

    ModelConfig to_config() const {
        ModelConfig m;
        m.k = k;
        std::copy(channels.begin(), channels.end(), m.conv_ch.begin());
        std::copy(strides.begin(), strides.end(), m.conv_stride.begin());
        m.h_neigh = h_neigh;
        m.h_sib = h_sib;
        m.sib_conv_ch = sib_conv_ch;
        m.d_an = d_an;
        m.embed = embed;
        m.geo = geo;
        m.header_hidden = header_hidden;
        m.lambda = lambda;
        m.use_sibling = !ablate_sibling;
        m.use_ancestor = !ablate_ancestor;
        m.use_surface = !ablate_surface;
        m.sibling_known_mask = sibling_known_mask;
        return m;
    }
};

void log_kv(const std::string& key, const std::string& value) { std::cout << key << "=" << value << "\n"; }

int run(const std::vector<std::string>& args) {
    CLI::App app{"pcz: learned octree point cloud codec"};
    app.require_subcommand(1);
    app.set_config("--config", "", "read defaults from a key=value file");

    // ---- synth ----
    auto* synth = app.add_subcommand("synth", "generate seeded synthetic point cloud frames");
    std::string synth_out, synth_scene_name = "mixed", synth_format = "ply";
    int synth_frames = 1;
    uint64_t synth_points = 10000, synth_seed = 1;
    double synth_noise = 0.0, synth_extent = 40.0, synth_patch = 0.25;
    bool synth_markers = true;
    synth->add_option("--out", synth_out, "output directory")->required();
    synth->add_option("--scene", synth_scene_name, "plane|quadric|sphere|boxes|mixed");
    synth->add_option("--frames", synth_frames, "number of frames");
    synth->add_option("--points", synth_points, "points per frame");
    synth->add_option("--noise", synth_noise, "gaussian surface noise, metres");
    synth->add_option("--extent", synth_extent, "scene cube side, metres");
    synth->add_option("--patch-scale", synth_patch, "plane/quadric patch size relative to extent");
    synth->add_flag("--markers,!--no-markers", synth_markers, "corner beacons pinning patch scenes to the stage");
    synth->add_option("--seed", synth_seed, "random seed");
    synth->add_option("--format", synth_format, "ply|xyz");

    // ---- train ----
    auto* train = app.add_subcommand("train", "train a model bundle on a directory of frames");
    std::string train_data, train_out;
    int train_depth = 8, train_epochs = 20, train_threads = 1, train_batch = 32;
    int refine_depth = 0, refine_epochs = 2;
    double train_lr = 1e-4;
    uint64_t train_seed = 1;
    ModelFlags mf;
    train->add_option("--data", train_data, "directory of training frames")->required();
    train->add_option("--out", train_out, "bundle output directory")->required();
    train->add_option("--depth", train_depth, "deepest trained level; coding works up to depth+1")->required();
    train->add_option("--epochs", train_epochs, "entropy model epochs");
    train->add_option("--lr", train_lr, "Adam learning rate");
    train->add_option("--batch", train_batch, "minibatch size");
    train->add_option("--threads", train_threads, "deterministic batch-parallel threads");
    train->add_option("--seed", train_seed, "random seed");
    train->add_option("--refine-depth", refine_depth, "also train a refinement model at this depth (0 = off)");
    train->add_option("--refine-epochs", refine_epochs, "refinement epochs");
    mf.attach(train);

    // ---- encode ----
    auto* encode = app.add_subcommand("encode", "compress point clouds into .pcz frames");
    std::string enc_bundle, enc_out, enc_report;
    std::vector<std::string> enc_inputs;
    int enc_depth = 0;
    bool enc_refine_flag = false;
    encode->add_option("--bundle", enc_bundle, "trained bundle directory")->required();
    encode->add_option("--depth", enc_depth, "octree depth")->required();
    encode->add_option("--out", enc_out, "output directory")->required();
    encode->add_option("--report", enc_report, "append per-frame rate rows to this CSV");
    encode->add_flag("--refine", enc_refine_flag, "mark frames as refinement-suggested");
    encode->add_option("inputs", enc_inputs, "point cloud files")->required();

    // ---- decode ----
    auto* decode = app.add_subcommand("decode", "decompress a .pcz frame into a point cloud");
    std::string dec_bundle, dec_in, dec_out, dec_refine = "off";
    decode->add_option("--bundle", dec_bundle, "trained bundle directory")->required();
    decode->add_option("--out", dec_out, "output cloud (.ply/.xyz)")->required();
    decode->add_option("--refine", dec_refine, "off|predict|full two-step reconstruction");
    decode->add_option("input", dec_in, "frame file")->required();

    // ---- eval ----
    auto* eval = app.add_subcommand("eval", "reconstruction quality metrics / corpus analysis");
    std::string eval_ref, eval_test, eval_out, eval_csv, eval_name = "frame", eval_js_dir;
    int eval_js_depth = 8;
    double eval_bpp = -1.0;
    eval->add_option("--ref", eval_ref, "reference cloud");
    eval->add_option("--test", eval_test, "reconstructed cloud");
    eval->add_option("--bpp", eval_bpp, "rate to embed in the report");
    eval->add_option("--out", eval_out, "write key=value report here");
    eval->add_option("--csv", eval_csv, "append a CSV row here");
    eval->add_option("--name", eval_name, "row name for the CSV");
    eval->add_option("--js-corpus", eval_js_dir, "directory of clouds for the per-level JS divergence matrix");
    eval->add_option("--js-depth", eval_js_depth, "octree depth for --js-corpus");

    // ---- inspect ----
    auto* inspect = app.add_subcommand("inspect", "dump a frame header and, with a bundle, its symbol histograms");
    std::string ins_frame, ins_bundle;
    inspect->add_option("input", ins_frame, "frame file")->required();
    inspect->add_option("--bundle", ins_bundle, "bundle directory (enables payload decode)");

    std::vector<const char*> argv;
    argv.reserve(args.size() + 1);
    argv.push_back("pcz");
    for (const std::string& a : args) argv.push_back(a.c_str());
    try {
        app.parse(int(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    if (synth->parsed()) {
        SynthParams p;
        p.kind = scene_from_name(synth_scene_name);
        p.n_points = synth_points;
        p.noise = synth_noise;
        p.extent = synth_extent;
        p.patch_scale = synth_patch;
        p.corner_markers = synth_markers;
        const CloudFormat fmt = synth_format == "xyz" ? CloudFormat::Xyz : CloudFormat::Ply;
        log_kv("cmd", "synth");
        log_kv("scene", synth_scene_name);
        log_kv("frames", std::to_string(synth_frames));
        log_kv("points", std::to_string(synth_points));
        log_kv("noise", std::to_string(synth_noise));
        log_kv("seed", std::to_string(synth_seed));
        fs::create_directories(synth_out);
        Rng rng(synth_seed);
        for (int f = 0; f < synth_frames; ++f) {
            Rng frame_rng = rng.fork(uint64_t(f) + 1);
            const PointCloud cloud = synth_scene(p, frame_rng);
            std::ostringstream name;
            name << "frame_" << std::setw(4) << std::setfill('0') << f << (fmt == CloudFormat::Xyz ? ".xyz" : ".ply");
            const std::string path = (fs::path(synth_out) / name.str()).string();
            save_points(cloud, path, fmt);
            std::cout << path << " points=" << cloud.size() << "\n";
        }
        return 0;
    }

    if (train->parsed()) {
        log_kv("cmd", "train");
        log_kv("data", train_data);
        log_kv("depth", std::to_string(train_depth));
        log_kv("epochs", std::to_string(train_epochs));
        log_kv("lr", std::to_string(train_lr));
        log_kv("seed", std::to_string(train_seed));
        log_kv("threads", std::to_string(train_threads));
        BundleConfig bc;
        bc.model = mf.to_config();
        bc.max_level = train_depth;
        bc.seed = train_seed;
        log_kv("arch", bc.model.arch_string());
        if (refine_depth > train_depth)
            throw ValidationError("--refine-depth must be <= --depth (no deeper entropy model to predict with)");

        const std::vector<std::string> files = list_cloud_files(train_data);
        std::vector<Octree> trees;
        trees.reserve(files.size());
        for (const std::string& f : files) {
            const PointCloud cloud = load_points(f);
            OctreeConfig oc;
            oc.depth = train_depth + 1;
            oc.bounds = compute_bounds(cloud, 0.0);
            trees.push_back(Octree::build(cloud, oc));
        }
        log_kv("frames", std::to_string(trees.size()));

        ModelBundle bundle = ModelBundle::fresh(bc);
        CorpusDataset ds = CorpusDataset::build(trees, bc.model, train_depth);
        TrainOptions to;
        to.epochs = train_epochs;
        to.lr = train_lr;
        to.batch = train_batch;
        to.threads = train_threads;
        to.seed = train_seed;
        to.log = &std::cout;
        train_bundle(bundle, ds, to);

        if (refine_depth >= 1) {
            std::vector<Octree> gt;
            gt.reserve(trees.size());
            for (const Octree& t : trees) gt.push_back(t.truncated(refine_depth + 1));
            RefineTrainOptions ro;
            ro.epochs = refine_epochs;
            ro.lr = train_lr;
            ro.seed = train_seed;
            ro.log = &std::cout;
            train_refinement(bundle, refine_depth, gt, ro);
        }
        bundle.save(train_out);
        log_kv("bundle", train_out);
        log_kv("bundle_hash", hex_digest(bundle.hash()));
        return 0;
    }

    if (encode->parsed()) {
        log_kv("cmd", "encode");
        log_kv("bundle", enc_bundle);
        log_kv("depth", std::to_string(enc_depth));
        const ModelBundle bundle = ModelBundle::load(enc_bundle);
        fs::create_directories(enc_out);
        std::ostringstream csv;
        csv << RateReport::csv_header() << "\n";
        for (const std::string& f : enc_inputs) {
            const PointCloud cloud = load_points(f);
            OctreeConfig oc;
            oc.depth = enc_depth;
            oc.bounds = compute_bounds(cloud, 0.0);
            const Octree tree = Octree::build(cloud, oc);
            const EncodeResult enc_res =
                encode_frame(cloud, tree, bundle, enc_refine_flag ? FrameHeader::kFlagRefine : 0);
            const std::string out_path = (fs::path(enc_out) / fs::path(f).stem()).string() + ".pcz";
            write_bytes(out_path, enc_res.frame);
            std::cout << out_path << " bpp=" << enc_res.report.bpp << " payload_bits=" << enc_res.report.payload_bits
                      << "\n";
            csv << enc_res.report.to_csv_row(fs::path(f).stem().string()) << "\n";
        }
        if (!enc_report.empty()) write_text(enc_report, csv.str());
        return 0;
    }

    if (decode->parsed()) {
        log_kv("cmd", "decode");
        log_kv("refine", dec_refine);
        const ModelBundle bundle = ModelBundle::load(dec_bundle);
        const std::vector<uint8_t> frame = read_frame_file(dec_in);
        const DecodedFrame df = decode_frame(frame, bundle);
        RefineMode mode;
        if (dec_refine == "off")
            mode = RefineMode::Off;
        else if (dec_refine == "predict")
            mode = RefineMode::Predict;
        else if (dec_refine == "full")
            mode = RefineMode::Full;
        else
            throw ValidationError("--refine must be off|predict|full");
        const PointCloud cloud = reconstruct_cloud(df.tree, bundle, mode);
        save_points(cloud, dec_out);
        std::cout << dec_out << " points=" << cloud.size() << " depth=" << int(df.header.depth) << "\n";
        return 0;
    }

    if (eval->parsed()) {
        if (!eval_js_dir.empty()) {
            log_kv("cmd", "eval-js");
            const std::vector<std::string> files = list_cloud_files(eval_js_dir);
            std::vector<Octree> trees;
            for (const std::string& f : files) {
                const PointCloud cloud = load_points(f);
                OctreeConfig oc;
                oc.depth = eval_js_depth;
                oc.bounds = compute_bounds(cloud, 0.0);
                trees.push_back(Octree::build(cloud, oc));
            }
            std::vector<const Octree*> ptrs;
            for (const Octree& t : trees) ptrs.push_back(&t);
            const JsMatrix js = js_divergence_by_level(ptrs);
            std::ostringstream os;
            for (int a = 0; a < js.levels; ++a) {
                for (int b = 0; b < js.levels; ++b) os << (b ? "," : "") << js.at(a, b);
                os << "\n";
            }
            std::cout << os.str();
            if (!eval_out.empty()) write_text(eval_out, os.str());
            return 0;
        }
        if (eval_ref.empty() || eval_test.empty())
            throw ValidationError("eval needs --ref and --test (or --js-corpus)");
        log_kv("cmd", "eval");
        const PointCloud ref = load_points(eval_ref);
        const PointCloud test = load_points(eval_test);
        MetricsReport r = evaluate_clouds(ref, test);
        r.bpp = eval_bpp;
        std::cout << r.to_kv();
        if (!eval_out.empty()) write_text(eval_out, r.to_kv());
        if (!eval_csv.empty()) {
            std::string row = r.to_csv_row(eval_name) + "\n";
            if (!fs::exists(eval_csv)) row = MetricsReport::csv_header() + "\n" + row;
            std::ofstream out(eval_csv, std::ios::app);
            if (!out) throw IoError("cannot write " + eval_csv);
            out << row;
        }
        return 0;
    }

    if (inspect->parsed()) {
        const std::vector<uint8_t> frame = read_frame_file(ins_frame);
        const FrameHeader h = FrameHeader::read(frame.data(), frame.size());
        std::cout << "magic=PCZ1\nversion=" << int(h.version) << "\ndepth=" << int(h.depth) << "\nflags=" << h.flags
                  << "\nn_points=" << h.n_points << "\norigin=" << h.origin.x << "," << h.origin.y << "," << h.origin.z
                  << "\nside=" << h.side << "\nbundle_hash=" << hex_digest(h.bundle_hash)
                  << "\npayload_bytes=" << h.payload_len << "\n";
        if (!ins_bundle.empty()) {
            const ModelBundle bundle = ModelBundle::load(ins_bundle);
            const DecodedFrame df = decode_frame(frame, bundle);
            for (int l = 0; l < df.tree.depth(); ++l) {
                std::array<uint64_t, 256> hist{};
                for (uint8_t s : df.tree.level(l).symbols) hist[s] += 1;
                uint64_t total = 0;
                double ent = 0.0;
                for (uint64_t c : hist) total += c;
                for (uint64_t c : hist)
                    if (c > 0) {
                        const double p = double(c) / double(total);
                        ent -= p * std::log2(p);
                    }
                std::cout << "level_" << l << ": symbols=" << total << " entropy_bits=" << ent << "\n";
            }
        }
        return 0;
    }

    return 0;
}

}  // namespace

int cli_main(const std::vector<std::string>& args) {
    try {
        return run(args);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }
}

}  // namespace pcz
